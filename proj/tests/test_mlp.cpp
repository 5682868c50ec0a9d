#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "cedqn/errors.hpp"
#include "cedqn/mlp.hpp"
#include "cedqn/rng.hpp"

using namespace cedqn;
namespace fs = std::filesystem;

namespace {

std::vector<double> random_vector(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

fs::path temp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "cedqn_test_mlp";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("init is deterministic in the seed and shaped by layer_sizes") {
  const Mlp a = mlp_init({4, 8, 5}, OutputActivation::kIdentity, 99);
  const Mlp b = mlp_init({4, 8, 5}, OutputActivation::kIdentity, 99);
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
  CHECK(a.weights[0].size() == 8 * 4);
  CHECK(a.weights[1].size() == 5 * 8);
  CHECK(a.biases[0].size() == 8);
  CHECK(a.biases[1].size() == 5);
  for (double x : a.biases[0]) CHECK(x == 0.0);
  // He-style bound for fan_in 4.
  const double bound = std::sqrt(6.0 / 4.0);
  for (double x : a.weights[0]) {
    CHECK(x >= -bound);
    CHECK(x <= bound);
  }
  const Mlp c = mlp_init({4, 8, 5}, OutputActivation::kIdentity, 100);
  CHECK(a.weights != c.weights);
}

TEST_CASE("init rejects degenerate layer lists") {
  CHECK_THROWS_AS(mlp_init({3}, OutputActivation::kIdentity, 1), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({}, OutputActivation::kIdentity, 1), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init({4, 0, 2}, OutputActivation::kIdentity, 1),
                  std::invalid_argument);
}

TEST_CASE("forward basics") {
  SUBCASE("all-zero parameters give all-zero output") {
    Mlp m = mlp_init({3, 4, 2}, OutputActivation::kIdentity, 5);
    for (auto& w : m.weights) std::fill(w.begin(), w.end(), 0.0);
    const auto out = forward(m, std::vector<double>{1.0, -2.0, 0.5});
    for (double x : out) CHECK(x == 0.0);
  }
  SUBCASE("identity single layer passes the input through") {
    Mlp m = mlp_init({2, 2}, OutputActivation::kIdentity, 5);
    m.weights[0] = {1.0, 0.0, 0.0, 1.0};
    m.biases[0] = {0.0, 0.0};
    const auto out = forward(m, std::vector<double>{3.0, -1.0});
    CHECK(out[0] == 3.0);
    CHECK(out[1] == -1.0);
  }
  SUBCASE("random net produces finite outputs") {
    Rng rng(17);
    const Mlp m = mlp_init({6, 16, 16, 4}, OutputActivation::kIdentity, 8);
    for (int rep = 0; rep < 20; ++rep) {
      const auto out = forward(m, random_vector(rng, 6));
      for (double x : out) CHECK(std::isfinite(x));
    }
  }
  SUBCASE("dimension mismatch is rejected") {
    const Mlp m = mlp_init({4, 8, 5}, OutputActivation::kIdentity, 1);
    CHECK_THROWS_AS(forward(m, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  }
}

TEST_CASE("backward closed forms") {
  SUBCASE("zero output gradient yields zero parameter gradients") {
    const Mlp m = mlp_init({5, 7, 3}, OutputActivation::kIdentity, 2);
    ForwardTrace trace;
    forward(m, std::vector<double>{1, 2, 3, 4, 5}, &trace);
    const Gradients g = backward(m, trace, std::vector<double>{0, 0, 0});
    for (const auto& w : g.weights)
      for (double x : w) CHECK(x == 0.0);
    for (const auto& b : g.biases)
      for (double x : b) CHECK(x == 0.0);
  }
  SUBCASE("single linear layer: weight grad = g outer x, bias grad = g") {
    Mlp m = mlp_init({3, 2}, OutputActivation::kIdentity, 3);
    const std::vector<double> x{0.5, -1.5, 2.0};
    const std::vector<double> g{2.0, -3.0};
    ForwardTrace trace;
    forward(m, x, &trace);
    const Gradients grads = backward(m, trace, g);
    for (int j = 0; j < 2; ++j) {
      CHECK(grads.biases[0][j] == g[j]);
      for (int i = 0; i < 3; ++i) CHECK(grads.weights[0][j * 3 + i] == g[j] * x[i]);
    }
  }
}

TEST_CASE("backprop matches central finite differences on a random deep net") {
  // Independent oracle: perturb one parameter at a time and difference the
  // scalar loss dot(output, g).
  Rng rng(2024);
  const Mlp net = mlp_init({6, 16, 16, 4}, OutputActivation::kIdentity, 77);
  const double h = 1e-5;
  int probes = 0;
  while (probes < 120) {
    const std::vector<double> x = random_vector(rng, 6);
    ForwardTrace trace;
    forward(net, x, &trace);
    // Keep pre-activations away from the ReLU kink so the difference
    // quotient is smooth.
    bool near_kink = false;
    for (size_t k = 0; k + 1 < trace.pre.size(); ++k)
      for (double z : trace.pre[k])
        if (std::abs(z) < 1e-3) near_kink = true;
    if (near_kink) continue;

    const std::vector<double> g = random_vector(rng, 4);
    const Gradients grads = backward(net, trace, g);

    const int layer = static_cast<int>(rng.next_below(net.num_layers()));
    const bool pick_bias = rng.next_below(5) == 0;
    Mlp probe = net;
    auto& params = pick_bias ? probe.biases[layer] : probe.weights[layer];
    const auto& grad_params = pick_bias ? grads.biases[layer] : grads.weights[layer];
    const int idx = static_cast<int>(rng.next_below(params.size()));

    auto loss_at = [&](double value) {
      params[idx] = value;
      const auto out = forward(probe, x);
      double loss = 0.0;
      for (int j = 0; j < 4; ++j) loss += out[j] * g[j];
      return loss;
    };
    const double original = params[idx];
    const double fd = (loss_at(original + h) - loss_at(original - h)) / (2.0 * h);
    const double bp = grad_params[idx];
    const double rel = std::abs(bp - fd) / std::max({std::abs(bp), std::abs(fd), 1e-4});
    CHECK(rel <= 1e-5);
    probes += 1;
  }
}

TEST_CASE("sigmoid output activation backprop also matches finite differences") {
  Rng rng(31);
  const Mlp net = mlp_init({5, 8, 1}, OutputActivation::kSigmoid, 13);
  const double h = 1e-5;
  for (int probe = 0; probe < 40; ++probe) {
    const std::vector<double> x = random_vector(rng, 5);
    ForwardTrace trace;
    forward(net, x, &trace);
    bool near_kink = false;
    for (double z : trace.pre[0])
      if (std::abs(z) < 1e-3) near_kink = true;
    if (near_kink) continue;
    const Gradients grads = backward(net, trace, std::vector<double>{1.0});

    Mlp perturbed = net;
    const int idx = static_cast<int>(rng.next_below(perturbed.weights[0].size()));
    auto loss_at = [&](double value) {
      perturbed.weights[0][idx] = value;
      return forward(perturbed, x)[0];
    };
    const double original = net.weights[0][idx];
    const double fd = (loss_at(original + h) - loss_at(original - h)) / (2.0 * h);
    const double bp = grads.weights[0][idx];
    const double rel = std::abs(bp - fd) / std::max({std::abs(bp), std::abs(fd), 1e-4});
    CHECK(rel <= 1e-5);
  }
}

TEST_CASE("batched forward/backward agree with the per-sample path") {
  Rng rng(55);
  for (const auto& arch : {std::vector<int>{7, 13, 9, 3}, std::vector<int>{9, 32, 1}}) {
    const auto activation =
        arch.back() == 1 ? OutputActivation::kSigmoid : OutputActivation::kIdentity;
    const Mlp net = mlp_init(arch, activation, 4242);
    const int batch = 5;
    const int in = arch.front(), out = arch.back();
    std::vector<double> inputs(batch * in);
    std::vector<double> douts(batch * out);
    for (double& v : inputs) v = rng.uniform(-1, 1);
    for (double& v : douts) v = rng.uniform(-1, 1);

    BatchBuffers buffers;
    forward_batch(net, inputs.data(), batch, buffers);
    Gradients batched = make_gradients(net);
    backward_batch(net, buffers, douts.data(), batched);

    Gradients accumulated = make_gradients(net);
    for (int b = 0; b < batch; ++b) {
      ForwardTrace trace;
      const auto y = forward(net, std::span(inputs).subspan(b * in, in), &trace);
      for (int j = 0; j < out; ++j)
        CHECK(std::abs(y[j] - buffers.post.back()[b * out + j]) < 1e-12);
      backward_into(net, trace, std::span(douts).subspan(b * out, out), accumulated);
    }
    for (size_t k = 0; k < batched.weights.size(); ++k) {
      for (size_t i = 0; i < batched.weights[k].size(); ++i) {
        const double a = batched.weights[k][i], b = accumulated.weights[k][i];
        CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
      }
      for (size_t i = 0; i < batched.biases[k].size(); ++i) {
        const double a = batched.biases[k][i], b = accumulated.biases[k][i];
        CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
      }
    }
  }
}

TEST_CASE("apply_update") {
  SUBCASE("sgd rule") {
    Mlp m = mlp_init({1, 1}, OutputActivation::kIdentity, 1);
    m.weights[0][0] = 1.0;
    Gradients g = make_gradients(m);
    g.weights[0][0] = 2.0;
    OptimizerState opt = make_sgd(m, 0.1);
    apply_update(m, g, opt);
    CHECK(m.weights[0][0] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(opt.step_count == 1);
  }
  SUBCASE("zero gradients leave parameters unchanged, adam still counts the step") {
    Mlp m = mlp_init({4, 6, 2}, OutputActivation::kIdentity, 9);
    const Mlp before = m;
    Gradients g = make_gradients(m);
    OptimizerState opt = make_adam(m, 1e-3);
    apply_update(m, g, opt);
    CHECK(m.weights == before.weights);
    CHECK(m.biases == before.biases);
    CHECK(opt.step_count == 1);
  }
  SUBCASE("adam moves against the gradient") {
    Mlp m = mlp_init({1, 1}, OutputActivation::kIdentity, 1);
    m.weights[0][0] = 1.0;
    Gradients g = make_gradients(m);
    g.weights[0][0] = 3.0;
    OptimizerState opt = make_adam(m, 1e-3);
    apply_update(m, g, opt);
    // First adam step moves by ~lr regardless of gradient scale.
    CHECK(m.weights[0][0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-6));
  }
  SUBCASE("non-finite gradient is an error") {
    Mlp m = mlp_init({2, 2}, OutputActivation::kIdentity, 1);
    Gradients g = make_gradients(m);
    g.weights[0][0] = std::nan("");
    OptimizerState opt = make_sgd(m, 0.1);
    CHECK_THROWS_AS(apply_update(m, g, opt), NumericError);
  }
}

TEST_CASE("global norm clipping") {
  Mlp m = mlp_init({2, 2}, OutputActivation::kIdentity, 1);
  Gradients g = make_gradients(m);
  g.weights[0] = {3.0, 4.0, 0.0, 0.0};  // norm 5
  clip_global_norm(g, 10.0);
  CHECK(g.weights[0][0] == 3.0);
  clip_global_norm(g, 2.5);
  CHECK(global_grad_norm(g) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(g.weights[0][0] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("copy_weights gives exact functional equality without aliasing") {
  Rng rng(3);
  const Mlp source = mlp_init({4, 8, 5}, OutputActivation::kIdentity, 10);
  Mlp target = mlp_init({4, 8, 5}, OutputActivation::kIdentity, 11);
  Mlp mutated = source;
  copy_weights(mutated, target);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = random_vector(rng, 4);
    CHECK(forward(mutated, x) == forward(target, x));
  }
  mutated.weights[0][0] += 1.0;
  CHECK(target.weights[0][0] == source.weights[0][0]);

  Mlp other = mlp_init({4, 9, 5}, OutputActivation::kIdentity, 12);
  CHECK_THROWS_AS(copy_weights(source, other), std::invalid_argument);
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  for (double x : {0.5, 2.0, 10.0})
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sigmoid(1.0) == doctest::Approx(0.7310585786).epsilon(1e-9));
  CHECK(std::isfinite(sigmoid(700.0)));
  CHECK(std::isfinite(sigmoid(-700.0)));
  CHECK(sigmoid(-700.0) > 0.0);
  CHECK(sigmoid(700.0) <= 1.0);
  CHECK(sigmoid(3.0) > sigmoid(2.9));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Mlp m = mlp_init({6, 16, 3}, OutputActivation::kSigmoid, 21);
  const auto path = temp_file("roundtrip.ckpt");
  save_mlp(m, path.string());
  const Mlp loaded = load_mlp(path.string());
  CHECK(loaded.layer_sizes == m.layer_sizes);
  CHECK(loaded.output_activation == m.output_activation);
  CHECK(loaded.weights == m.weights);
  CHECK(loaded.biases == m.biases);
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto x = random_vector(rng, 6);
    CHECK(forward(m, x) == forward(loaded, x));
  }
}

TEST_CASE("checkpoint error paths are distinct") {
  const Mlp m = mlp_init({4, 8, 2}, OutputActivation::kIdentity, 31);
  const auto path = temp_file("errors.ckpt");
  save_mlp(m, path.string());

  SUBCASE("truncated block is malformed") {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    const auto truncated = temp_file("truncated.ckpt");
    std::ofstream out(truncated, std::ios::binary);
    out << content.substr(0, content.size() - 16);
    out.close();
    try {
      load_mlp(truncated.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kMalformed);
      CHECK(std::string(e.what()).find("malformed checkpoint") != std::string::npos);
    }
  }
  SUBCASE("future format version is a version mismatch") {
    const auto versioned = temp_file("version.ckpt");
    std::ofstream out(versioned, std::ios::binary);
    out << R"({"format_version":99,"layer_sizes":[2,2],"hidden_activation":"relu",)"
        << R"("output_activation":"identity","param_bytes":48})" << "\n";
    out.close();
    try {
      load_mlp(versioned.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kVersionMismatch);
      CHECK(std::string(e.what()).find("version mismatch") != std::string::npos);
    }
  }
  SUBCASE("inconsistent parameter byte count is a shape mismatch") {
    const auto shaped = temp_file("shape.ckpt");
    std::ofstream out(shaped, std::ios::binary);
    out << R"({"format_version":1,"layer_sizes":[2,2],"hidden_activation":"relu",)"
        << R"("output_activation":"identity","param_bytes":40})" << "\n";
    out << std::string(40, '\0');
    out.close();
    try {
      load_mlp(shaped.string());
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind == CheckpointError::Kind::kShapeMismatch);
    }
  }
  SUBCASE("missing file is an io error") {
    CHECK_THROWS_AS(load_mlp("/nonexistent/nope.ckpt"), IoError);
  }
}
