#include "cedqn/mlp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "cedqn/errors.hpp"
#include "cedqn/rng.hpp"

namespace cedqn {

namespace {

void check_layer_sizes(const std::vector<int>& layer_sizes) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("mlp: need at least input and output layers");
  for (int n : layer_sizes)
    if (n < 1) throw std::invalid_argument("mlp: zero-width layer");
}

void check_congruent(const Mlp& mlp, const Gradients& g, const char* what) {
  if (g.weights.size() != mlp.weights.size() || g.biases.size() != mlp.biases.size())
    throw std::invalid_argument(std::string(what) + ": layer count mismatch");
  for (size_t k = 0; k < g.weights.size(); ++k) {
    if (g.weights[k].size() != mlp.weights[k].size() ||
        g.biases[k].size() != mlp.biases[k].size())
      throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

size_t Mlp::parameter_count() const {
  size_t n = 0;
  for (size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
  return n;
}

void Gradients::zero() {
  for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

Gradients make_gradients(const Mlp& mlp) {
  Gradients g;
  g.weights.reserve(mlp.weights.size());
  g.biases.reserve(mlp.biases.size());
  for (size_t k = 0; k < mlp.weights.size(); ++k) {
    g.weights.emplace_back(mlp.weights[k].size(), 0.0);
    g.biases.emplace_back(mlp.biases[k].size(), 0.0);
  }
  return g;
}

Mlp mlp_init(const std::vector<int>& layer_sizes, OutputActivation output_activation,
             uint64_t seed) {
  check_layer_sizes(layer_sizes);
  Mlp mlp;
  mlp.layer_sizes = layer_sizes;
  mlp.output_activation = output_activation;
  Rng rng(seed);
  for (size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k];
    const int fan_out = layer_sizes[k + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    std::vector<double> w(static_cast<size_t>(fan_out) * fan_in);
    for (double& x : w) x = rng.uniform(-bound, bound);
    mlp.weights.push_back(std::move(w));
    mlp.biases.emplace_back(fan_out, 0.0);
  }
  return mlp;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> forward(const Mlp& mlp, std::span<const double> input,
                            ForwardTrace* trace) {
  if (static_cast<int>(input.size()) != mlp.input_size())
    throw std::invalid_argument("forward: input length != input layer size");
  const int layers = mlp.num_layers();
  std::vector<double> act(input.begin(), input.end());
  if (trace) {
    trace->pre.assign(layers, {});
    trace->post.assign(layers + 1, {});
    trace->post[0] = act;
  }
  for (int k = 0; k < layers; ++k) {
    const int in = mlp.layer_sizes[k];
    const int out = mlp.layer_sizes[k + 1];
    const double* w = mlp.weights[k].data();
    std::vector<double> z(mlp.biases[k]);
    for (int j = 0; j < out; ++j) {
      const double* row = w + static_cast<size_t>(j) * in;
      double acc = 0.0;
      for (int i = 0; i < in; ++i) acc += row[i] * act[i];
      z[j] += acc;
    }
    if (trace) trace->pre[k] = z;
    if (k + 1 < layers) {
      for (double& v : z)
        if (v < 0.0) v = 0.0;
    } else if (mlp.output_activation == OutputActivation::kSigmoid) {
      for (double& v : z) v = sigmoid(v);
    }
    act = std::move(z);
    if (trace) trace->post[k + 1] = act;
  }
  return act;
}

void backward_into(const Mlp& mlp, const ForwardTrace& trace,
                   std::span<const double> output_gradient, Gradients& accum) {
  const int layers = mlp.num_layers();
  if (static_cast<int>(trace.pre.size()) != layers ||
      static_cast<int>(trace.post.size()) != layers + 1)
    throw std::invalid_argument("backward: trace does not match network depth");
  if (static_cast<int>(output_gradient.size()) != mlp.output_size())
    throw std::invalid_argument("backward: output gradient length mismatch");
  for (int k = 0; k < layers; ++k) {
    if (static_cast<int>(trace.pre[k].size()) != mlp.layer_sizes[k + 1] ||
        static_cast<int>(trace.post[k].size()) != mlp.layer_sizes[k])
      throw std::invalid_argument("backward: trace shape mismatch");
  }
  check_congruent(mlp, accum, "backward");

  std::vector<double> delta(output_gradient.begin(), output_gradient.end());
  if (mlp.output_activation == OutputActivation::kSigmoid) {
    for (size_t j = 0; j < delta.size(); ++j) {
      const double s = sigmoid(trace.pre[layers - 1][j]);
      delta[j] *= s * (1.0 - s);
    }
  }
  for (int k = layers - 1; k >= 0; --k) {
    const int in = mlp.layer_sizes[k];
    const int out = mlp.layer_sizes[k + 1];
    const std::vector<double>& a_in = trace.post[k];
    double* wg = accum.weights[k].data();
    for (int j = 0; j < out; ++j) {
      const double d = delta[j];
      accum.biases[k][j] += d;
      double* row = wg + static_cast<size_t>(j) * in;
      for (int i = 0; i < in; ++i) row[i] += d * a_in[i];
    }
    if (k > 0) {
      std::vector<double> prev(in, 0.0);
      const double* w = mlp.weights[k].data();
      for (int j = 0; j < out; ++j) {
        const double d = delta[j];
        const double* row = w + static_cast<size_t>(j) * in;
        for (int i = 0; i < in; ++i) prev[i] += d * row[i];
      }
      // ReLU mask from the previous layer's pre-activations.
      for (int i = 0; i < in; ++i)
        if (trace.pre[k - 1][i] <= 0.0) prev[i] = 0.0;
      delta = std::move(prev);
    }
  }
}

Gradients backward(const Mlp& mlp, const ForwardTrace& trace,
                   std::span<const double> output_gradient) {
  Gradients g = make_gradients(mlp);
  backward_into(mlp, trace, output_gradient, g);
  return g;
}

OptimizerState make_sgd(const Mlp& mlp, double learning_rate) {
  (void)mlp;
  OptimizerState s;
  s.algo = OptimizerState::Algo::kSgd;
  s.learning_rate = learning_rate;
  if (!(learning_rate > 0.0)) throw std::invalid_argument("sgd: learning rate must be > 0");
  return s;
}

OptimizerState make_adam(const Mlp& mlp, double learning_rate) {
  OptimizerState s;
  s.algo = OptimizerState::Algo::kAdam;
  s.learning_rate = learning_rate;
  if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be > 0");
  s.first_moment = make_gradients(mlp);
  s.second_moment = make_gradients(mlp);
  return s;
}

void apply_update(Mlp& mlp, const Gradients& gradients, OptimizerState& state) {
  check_congruent(mlp, gradients, "apply_update");
  for (size_t k = 0; k < gradients.weights.size(); ++k) {
    if (!all_finite(gradients.weights[k]) || !all_finite(gradients.biases[k]))
      throw NumericError("apply_update: non-finite gradient");
  }
  state.step_count += 1;
  if (state.algo == OptimizerState::Algo::kSgd) {
    for (size_t k = 0; k < mlp.weights.size(); ++k) {
      for (size_t i = 0; i < mlp.weights[k].size(); ++i)
        mlp.weights[k][i] -= state.learning_rate * gradients.weights[k][i];
      for (size_t i = 0; i < mlp.biases[k].size(); ++i)
        mlp.biases[k][i] -= state.learning_rate * gradients.biases[k][i];
    }
  } else {
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    auto adam_step = [&](std::vector<double>& theta, const std::vector<double>& g,
                         std::vector<double>& m, std::vector<double>& v) {
      for (size_t i = 0; i < theta.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
      }
    };
    for (size_t k = 0; k < mlp.weights.size(); ++k) {
      adam_step(mlp.weights[k], gradients.weights[k], state.first_moment.weights[k],
                state.second_moment.weights[k]);
      adam_step(mlp.biases[k], gradients.biases[k], state.first_moment.biases[k],
                state.second_moment.biases[k]);
    }
  }
  for (size_t k = 0; k < mlp.weights.size(); ++k) {
    if (!all_finite(mlp.weights[k]) || !all_finite(mlp.biases[k]))
      throw NumericError("apply_update: parameters diverged to non-finite values");
  }
}

double global_grad_norm(const Gradients& gradients) {
  double sq = 0.0;
  for (const auto& w : gradients.weights)
    for (double x : w) sq += x * x;
  for (const auto& b : gradients.biases)
    for (double x : b) sq += x * x;
  return std::sqrt(sq);
}

void clip_global_norm(Gradients& gradients, double max_norm) {
  const double norm = global_grad_norm(gradients);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (auto& w : gradients.weights)
    for (double& x : w) x *= scale;
  for (auto& b : gradients.biases)
    for (double& x : b) x *= scale;
}

void copy_weights(const Mlp& source, Mlp& target) {
  if (source.layer_sizes != target.layer_sizes ||
      source.output_activation != target.output_activation)
    throw std::invalid_argument("copy_weights: architecture mismatch");
  target.weights = source.weights;
  target.biases = source.biases;
}

// ---------------------------------------------------------------------------
// Batched path.

namespace {

void ensure_buffers(const Mlp& mlp, int batch, BatchBuffers& b) {
  const int layers = mlp.num_layers();
  b.batch = batch;
  b.input.resize(static_cast<size_t>(batch) * mlp.input_size());
  b.pre.resize(layers);
  b.post.resize(layers);
  b.wt.resize(layers);
  b.delta.resize(layers);
  for (int k = 0; k < layers; ++k) {
    const size_t n = static_cast<size_t>(batch) * mlp.layer_sizes[k + 1];
    b.pre[k].resize(n);
    b.post[k].resize(n);
    b.delta[k].resize(n);
    b.wt[k].resize(mlp.weights[k].size());
  }
}

}  // namespace

void forward_batch(const Mlp& mlp, const double* inputs, int batch, BatchBuffers& buffers) {
  const int layers = mlp.num_layers();
  ensure_buffers(mlp, batch, buffers);
  std::memcpy(buffers.input.data(), inputs,
              sizeof(double) * static_cast<size_t>(batch) * mlp.input_size());
  const double* act = buffers.input.data();
  for (int k = 0; k < layers; ++k) {
    const int in = mlp.layer_sizes[k];
    const int out = mlp.layer_sizes[k + 1];
    // Transposed weights make the inner j-loop contiguous.
    double* wt = buffers.wt[k].data();
    const double* w = mlp.weights[k].data();
    for (int j = 0; j < out; ++j)
      for (int i = 0; i < in; ++i) wt[static_cast<size_t>(i) * out + j] = w[static_cast<size_t>(j) * in + i];

    double* z = buffers.pre[k].data();
    const double* bias = mlp.biases[k].data();
    for (int r = 0; r < batch; ++r)
      std::memcpy(z + static_cast<size_t>(r) * out, bias, sizeof(double) * out);
    for (int r = 0; r < batch; ++r) {
      const double* x = act + static_cast<size_t>(r) * in;
      double* zr = z + static_cast<size_t>(r) * out;
      for (int i = 0; i < in; ++i) {
        const double xi = x[i];
        const double* wrow = wt + static_cast<size_t>(i) * out;
        for (int j = 0; j < out; ++j) zr[j] += xi * wrow[j];
      }
    }
    double* a = buffers.post[k].data();
    const size_t n = static_cast<size_t>(batch) * out;
    if (k + 1 < layers) {
      for (size_t i = 0; i < n; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
    } else if (mlp.output_activation == OutputActivation::kSigmoid) {
      for (size_t i = 0; i < n; ++i) a[i] = sigmoid(z[i]);
    } else {
      std::memcpy(a, z, sizeof(double) * n);
    }
    act = a;
  }
}

void backward_batch(const Mlp& mlp, BatchBuffers& buffers, const double* output_gradients,
                    Gradients& accum) {
  const int layers = mlp.num_layers();
  const int batch = buffers.batch;
  check_congruent(mlp, accum, "backward_batch");

  {
    const int out = mlp.layer_sizes[layers];
    double* d = buffers.delta[layers - 1].data();
    const size_t n = static_cast<size_t>(batch) * out;
    if (mlp.output_activation == OutputActivation::kSigmoid) {
      const double* a = buffers.post[layers - 1].data();
      for (size_t i = 0; i < n; ++i) d[i] = output_gradients[i] * a[i] * (1.0 - a[i]);
    } else {
      std::memcpy(d, output_gradients, sizeof(double) * n);
    }
  }

  for (int k = layers - 1; k >= 0; --k) {
    const int in = mlp.layer_sizes[k];
    const int out = mlp.layer_sizes[k + 1];
    const double* delta = buffers.delta[k].data();
    const double* a_in = k == 0 ? buffers.input.data() : buffers.post[k - 1].data();

    double* wg = accum.weights[k].data();
    double* bg = accum.biases[k].data();
    for (int r = 0; r < batch; ++r) {
      const double* dr = delta + static_cast<size_t>(r) * out;
      const double* xr = a_in + static_cast<size_t>(r) * in;
      for (int j = 0; j < out; ++j) {
        const double d = dr[j];
        if (d == 0.0) continue;
        bg[j] += d;
        double* row = wg + static_cast<size_t>(j) * in;
        for (int i = 0; i < in; ++i) row[i] += d * xr[i];
      }
    }

    if (k > 0) {
      double* dprev = buffers.delta[k - 1].data();
      std::fill(dprev, dprev + static_cast<size_t>(batch) * in, 0.0);
      const double* w = mlp.weights[k].data();
      for (int r = 0; r < batch; ++r) {
        const double* dr = delta + static_cast<size_t>(r) * out;
        double* pr = dprev + static_cast<size_t>(r) * in;
        for (int j = 0; j < out; ++j) {
          const double d = dr[j];
          if (d == 0.0) continue;
          const double* row = w + static_cast<size_t>(j) * in;
          for (int i = 0; i < in; ++i) pr[i] += d * row[i];
        }
      }
      const double* zprev = buffers.pre[k - 1].data();
      const size_t n = static_cast<size_t>(batch) * in;
      for (size_t i = 0; i < n; ++i)
        if (zprev[i] <= 0.0) dprev[i] = 0.0;
    }
  }
}

}  // namespace cedqn
