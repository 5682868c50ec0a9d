#pragma once

#include <stdexcept>
#include <string>

namespace cedqn {

// Error categories the CLI maps to distinct exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Divergent training math (NaN/inf loss or gradients).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint problems, reported distinctly per failure mode.
struct CheckpointError : IoError {
  enum class Kind { kMalformed, kVersionMismatch, kShapeMismatch };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}
};

}  // namespace cedqn
