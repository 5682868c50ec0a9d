#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "cedqn/errors.hpp"
#include "cedqn/mlp.hpp"

namespace cedqn {

namespace {

constexpr int kFormatVersion = 1;

void put_f64_le(std::string& out, double x) {
  const auto bits = std::bit_cast<uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64_le(const char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

[[noreturn]] void malformed(const std::string& detail) {
  throw CheckpointError(CheckpointError::Kind::kMalformed, "malformed checkpoint: " + detail);
}

}  // namespace

void save_mlp(const Mlp& mlp, const std::string& path) {
  std::string block;
  block.reserve(mlp.parameter_count() * 8);
  for (size_t k = 0; k < mlp.weights.size(); ++k) {
    for (double x : mlp.weights[k]) put_f64_le(block, x);
    for (double x : mlp.biases[k]) put_f64_le(block, x);
  }
  nlohmann::json header = {
      {"format_version", kFormatVersion},
      {"layer_sizes", mlp.layer_sizes},
      {"hidden_activation", "relu"},
      {"output_activation",
       mlp.output_activation == OutputActivation::kSigmoid ? "sigmoid" : "identity"},
      {"param_bytes", block.size()},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << header.dump() << '\n';
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  if (!out) throw IoError("write failed: " + path);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) malformed("missing header line");

  nlohmann::json header = nlohmann::json::parse(header_line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) malformed("header is not valid JSON");
  if (!header.contains("format_version") || !header["format_version"].is_number_integer())
    malformed("missing format_version");
  if (header["format_version"].get<int>() != kFormatVersion)
    throw CheckpointError(CheckpointError::Kind::kVersionMismatch,
                          "checkpoint version mismatch: got " +
                              header["format_version"].dump() + ", expected 1");
  for (const char* key : {"layer_sizes", "hidden_activation", "output_activation", "param_bytes"})
    if (!header.contains(key)) malformed(std::string("missing field ") + key);
  if (header["hidden_activation"].get<std::string>() != "relu")
    malformed("unknown hidden activation");

  Mlp mlp;
  const std::string out_act = header["output_activation"].get<std::string>();
  if (out_act == "identity") {
    mlp.output_activation = OutputActivation::kIdentity;
  } else if (out_act == "sigmoid") {
    mlp.output_activation = OutputActivation::kSigmoid;
  } else {
    malformed("unknown output activation: " + out_act);
  }
  if (!header["layer_sizes"].is_array() || header["layer_sizes"].size() < 2)
    malformed("layer_sizes must list at least two layers");
  mlp.layer_sizes = header["layer_sizes"].get<std::vector<int>>();
  for (int n : mlp.layer_sizes)
    if (n < 1) malformed("non-positive layer size");

  size_t expected_params = 0;
  for (size_t k = 0; k + 1 < mlp.layer_sizes.size(); ++k)
    expected_params += static_cast<size_t>(mlp.layer_sizes[k + 1]) * (mlp.layer_sizes[k] + 1);
  const auto declared_bytes = header["param_bytes"].get<uint64_t>();
  if (declared_bytes != expected_params * 8)
    throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                          "checkpoint shape mismatch: param_bytes does not match layer_sizes");

  std::string block(declared_bytes, '\0');
  in.read(block.data(), static_cast<std::streamsize>(declared_bytes));
  if (static_cast<uint64_t>(in.gcount()) != declared_bytes)
    malformed("truncated parameter block");

  const char* p = block.data();
  for (size_t k = 0; k + 1 < mlp.layer_sizes.size(); ++k) {
    const size_t in_n = mlp.layer_sizes[k];
    const size_t out_n = mlp.layer_sizes[k + 1];
    std::vector<double> w(out_n * in_n);
    for (double& x : w) {
      x = get_f64_le(p);
      p += 8;
    }
    std::vector<double> b(out_n);
    for (double& x : b) {
      x = get_f64_le(p);
      p += 8;
    }
    mlp.weights.push_back(std::move(w));
    mlp.biases.push_back(std::move(b));
  }
  return mlp;
}

}  // namespace cedqn
