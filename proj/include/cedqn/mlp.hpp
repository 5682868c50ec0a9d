#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cedqn {

enum class OutputActivation { kIdentity, kSigmoid };

// Dense feed-forward network: ReLU hidden layers, identity or sigmoid
// output. weights[k] is (layer_sizes[k+1] x layer_sizes[k]) row-major,
// biases[k] has layer_sizes[k+1] entries. All math is in doubles.
struct Mlp {
  std::vector<int> layer_sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  OutputActivation output_activation = OutputActivation::kIdentity;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  size_t parameter_count() const;
};

// Per-layer parameter gradients, shape-congruent with the Mlp.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  void zero();
};

Gradients make_gradients(const Mlp& mlp);

// Activations recorded by forward() so backward() can run.
// post[0] is the input; post[k+1] / pre[k] belong to layer k.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;
};

// Weights uniform in +/- sqrt(6 / fan_in), biases zero. Deterministic in seed.
Mlp mlp_init(const std::vector<int>& layer_sizes, OutputActivation output_activation,
             uint64_t seed);

std::vector<double> forward(const Mlp& mlp, std::span<const double> input,
                            ForwardTrace* trace = nullptr);

// Gradients of dot(output, output_gradient) w.r.t. every parameter.
Gradients backward(const Mlp& mlp, const ForwardTrace& trace,
                   std::span<const double> output_gradient);
// Same, accumulating (+=) into an existing shape-congruent Gradients.
void backward_into(const Mlp& mlp, const ForwardTrace& trace,
                   std::span<const double> output_gradient, Gradients& accum);

struct OptimizerState {
  enum class Algo { kSgd, kAdam };
  Algo algo = Algo::kSgd;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int64_t step_count = 0;
  Gradients first_moment;   // adam only
  Gradients second_moment;  // adam only
};

OptimizerState make_sgd(const Mlp& mlp, double learning_rate);
OptimizerState make_adam(const Mlp& mlp, double learning_rate);

// One optimizer step. Rejects non-finite gradients; checks parameters
// stay finite afterwards.
void apply_update(Mlp& mlp, const Gradients& gradients, OptimizerState& state);

double global_grad_norm(const Gradients& gradients);
void clip_global_norm(Gradients& gradients, double max_norm);

// target's parameters become bit-equal to source's. Architectures must match.
void copy_weights(const Mlp& source, Mlp& target);

// Numerically stable logistic; saturates instead of overflowing.
double sigmoid(double x);

// Checkpoint container: one JSON header line, then the declared number of
// little-endian float64 bytes (per layer: weights row-major, then biases).
void save_mlp(const Mlp& mlp, const std::string& path);
Mlp load_mlp(const std::string& path);

// ---------------------------------------------------------------------------
// Batched forward/backward used by the training hot loop. Mathematically the
// same maps as forward()/backward(), laid out batch-major so the inner loops
// vectorize; a unit test pins batch == per-sample results.

struct BatchBuffers {
  int batch = 0;
  std::vector<double> input;                   // batch x in
  std::vector<std::vector<double>> pre;        // [k]: batch x out_k
  std::vector<std::vector<double>> post;       // [k]: batch x out_k
  std::vector<std::vector<double>> wt;         // [k]: in_k x out_k (W transposed)
  std::vector<std::vector<double>> delta;      // [k]: batch x out_k scratch
};

// Outputs land in buffers.post.back().
void forward_batch(const Mlp& mlp, const double* inputs, int batch, BatchBuffers& buffers);
// output_gradients is batch x output_size; accumulates into accum.
void backward_batch(const Mlp& mlp, BatchBuffers& buffers, const double* output_gradients,
                    Gradients& accum);

}  // namespace cedqn
