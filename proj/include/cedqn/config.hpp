#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "cedqn/training.hpp"

namespace cedqn {

// A fully validated experiment configuration: the single-run part is always
// usable by train/eval; the comparison matrix exists when the file carries a
// "compare" block. `resolved` records every default and override actually in
// effect, for the provenance JSON written next to run outputs.
struct LoadedConfig {
  RunConfig run;
  std::optional<ComparisonSpec> compare;
  int trials = 10;
  std::string checkpoint_dir;
  nlohmann::json resolved;
};

// Unknown keys are rejected; violations name the offending field.
LoadedConfig config_from_json(const nlohmann::json& root);
LoadedConfig load_config(const std::string& path);

struct ConfigOverrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> algo;
  std::optional<int> team;
  std::optional<int> task_size;
  std::optional<int> episodes;
};

// Flag overrides take precedence over file values; the result is re-validated
// and `resolved` refreshed.
void apply_overrides(LoadedConfig& config, const ConfigOverrides& overrides);

}  // namespace cedqn
