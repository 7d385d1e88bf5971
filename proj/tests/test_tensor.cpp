#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "s2wtm/checkpoint.hpp"
#include "s2wtm/spherical_ot.hpp"
#include "s2wtm/tensor.hpp"

using namespace s2wtm;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = lo + (hi - lo) * rng.uniform();
  return m;
}

// Builds loss = sum(op(params...) * weights) and compares the analytic
// gradient of every parameter with central differences. The first pass
// records contexts (masks, permutations, shifts); the perturbed passes replay them.
struct FdCase {
  Graph g;
  std::vector<Var> params;
  Var loss;
  Bindings inputs;
  RngStream rng{99};
  Mode mode = Mode::Eval;

  double max_rel_error(double h = 1e-6) {
    const ForwardOptions first{mode, &rng, false, 1};
    const ForwardOptions replay{mode, &rng, true, 1};
    g.forward(inputs, first);
    g.backward(loss);
    double worst = 0.0;
    for (Var p : params) {
      const Eigen::MatrixXd analytic = g.grad(p);
      Eigen::MatrixXd& value = g.parameter_value(p);
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        const double saved = value(i);
        value(i) = saved + h;
        g.forward(inputs, replay);
        const double up = g.value(loss)(0, 0);
        value(i) = saved - h;
        g.forward(inputs, replay);
        const double down = g.value(loss)(0, 0);
        value(i) = saved;
        const double numeric = (up - down) / (2 * h);
        const double scale = std::max({std::abs(numeric), std::abs(analytic(i)), 1e-3});
        worst = std::max(worst, std::abs(numeric - analytic(i)) / scale);
      }
    }
    g.forward(inputs, replay);  // leave values consistent with the unperturbed parameters
    return worst;
  }

  Var weighted(Var out, Eigen::Index r, Eigen::Index c) {
    RngStream w(7);
    inputs.emplace("weights", random_matrix(r, c, w));
    return sum(out * g.input("weights"));
  }
};

}  // namespace

TEST_CASE("tensor factories record shapes") {
  CHECK(Tensor::scalar(2.0).rank() == 0);
  CHECK(Tensor::scalar(2.0).size() == 1);
  const Tensor v = Tensor::vector(Eigen::VectorXd::LinSpaced(4, 0, 3));
  CHECK(v.rank() == 1);
  CHECK(v.shape == std::vector<std::uint64_t>{4});
  CHECK(v.values.rows() == 1);
  const Tensor m = Tensor::matrix(Eigen::MatrixXd::Zero(2, 3));
  CHECK(m.shape == std::vector<std::uint64_t>{2, 3});
}

TEST_CASE("matmul, add_bias, add, mul, scale match finite differences") {
  FdCase t;
  RngStream rng(1);
  Var a = t.g.parameter("a", random_matrix(3, 4, rng));
  Var b = t.g.parameter("b", random_matrix(4, 2, rng));
  Var bias = t.g.parameter("bias", random_matrix(1, 2, rng));
  Var c = t.g.parameter("c", random_matrix(3, 2, rng));
  t.params = {a, b, bias, c};
  Var out = scale(add_bias(matmul(a, b), bias) + c * c, 1.7);
  t.loss = t.weighted(out, 3, 2);
  CHECK(t.max_rel_error() < 1e-7);
}

TEST_CASE("relu, softmax, log, sum match finite differences") {
  FdCase t;
  RngStream rng(2);
  Eigen::MatrixXd init = random_matrix(4, 5, rng);
  // Keep entries away from the ReLU kink at 0.
  for (Eigen::Index i = 0; i < init.size(); ++i)
    if (std::abs(init(i)) < 0.05) init(i) = 0.3;
  Var a = t.g.parameter("a", init);
  t.params = {a};
  t.loss = t.weighted(log(softmax(relu(a))), 4, 5);
  CHECK(t.max_rel_error() < 1e-7);
}

TEST_CASE("l2_normalize matches finite differences and yields unit rows") {
  FdCase t;
  RngStream rng(3);
  Var a = t.g.parameter("a", random_matrix(5, 4, rng));
  t.params = {a};
  Var n = l2_normalize(a);
  t.loss = t.weighted(n, 5, 4);
  CHECK(t.max_rel_error() < 1e-7);
  for (Eigen::Index r = 0; r < 5; ++r) CHECK(t.g.value(n).row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cross_entropy matches finite differences and the closed form") {
  FdCase t;
  RngStream rng(4);
  Var logits = t.g.parameter("logits", random_matrix(3, 6, rng));
  Var target = t.g.input("target");
  t.inputs.emplace("target", random_matrix(3, 6, rng, 0.0, 3.0));
  t.params = {logits};
  t.loss = cross_entropy(target, softmax(logits));
  // The loss is O(10) against gradients of O(1e-2), so rounding in the
  // central difference alone reaches a few 1e-7.
  CHECK(t.max_rel_error() < 1e-6);

  // Two unit counts against a uniform distribution over V words cost 2 log V.
  Graph g;
  Var x = g.input("x");
  Var p = g.input("p");
  Var ce = cross_entropy(x, p);
  const int v = 30;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(1, v);
  counts(0, 3) = 1;
  counts(0, 17) = 1;
  g.forward({{"x", counts}, {"p", Eigen::MatrixXd::Constant(1, v, 1.0 / v)}}, {});
  CHECK(g.value(ce)(0, 0) == doctest::Approx(2 * std::log(v)).epsilon(1e-14));
}

TEST_CASE("dropout replays its mask and matches finite differences") {
  FdCase t;
  t.mode = Mode::Train;
  RngStream rng(5);
  Var a = t.g.parameter("a", random_matrix(6, 5, rng));
  t.params = {a};
  Var d = dropout(a, 0.4);
  t.loss = t.weighted(d, 6, 5);
  CHECK(t.max_rel_error() < 1e-7);
  // Surviving entries are scaled by 1/(1-p); dropped ones are exactly zero.
  const Eigen::MatrixXd& in = t.g.value(a);
  const Eigen::MatrixXd& out = t.g.value(d);
  for (Eigen::Index i = 0; i < out.size(); ++i)
    CHECK((out(i) == 0.0 || std::abs(out(i) - in(i) / 0.6) < 1e-15));
}

TEST_CASE("dropout is the identity in eval mode and unbiased in train mode") {
  Graph g;
  Var x = g.input("x");
  Var d = dropout(x, 0.5);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(200, 200);
  g.forward({{"x", ones}}, {Mode::Eval});
  CHECK(g.value(d) == ones);
  RngStream rng(11);
  g.forward({{"x", ones}}, {Mode::Train, &rng});
  CHECK(g.value(d).mean() == doctest::Approx(1.0).epsilon(0.02));
  CHECK_THROWS_AS(dropout(x, 1.0), ConfigError);
}

TEST_CASE("circle_angles, sort_columns and circular_w2_cost match finite differences") {
  FdCase t;
  t.mode = Mode::Train;
  RngStream rng(6);
  const Eigen::Index n = 7, d = 4, m = 5;
  Var pts = t.g.parameter("pts", random_matrix(n, d, rng));
  Var planes = t.g.input("planes");
  Var prior = t.g.input("prior");
  t.inputs.emplace("planes", ot::sample_planes(d, m, rng.split(1)));
  t.inputs.emplace("prior", random_matrix(n, d, rng));
  t.params = {pts};
  t.loss = circular_w2_cost(sort_columns(circle_angles(l2_normalize(pts), planes)),
                            sort_columns(circle_angles(prior, planes)));
  CHECK(t.max_rel_error() < 1e-5);
}

TEST_CASE("squared_diff_mean through matmul projections matches finite differences") {
  FdCase t;
  RngStream rng(8);
  Var pts = t.g.parameter("pts", random_matrix(6, 3, rng));
  Var dirs = t.g.input("dirs");
  Var y = t.g.input("y");
  t.inputs.emplace("dirs", random_matrix(3, 4, rng));
  t.inputs.emplace("y", random_matrix(6, 4, rng));
  t.params = {pts};
  t.loss = squared_diff_mean(sort_columns(matmul(pts, dirs)), sort_columns(y));
  CHECK(t.max_rel_error() < 1e-6);
}

TEST_CASE("graph misuse raises typed errors") {
  Graph g;
  Var x = g.input("x");
  Var p = g.parameter("p", Eigen::MatrixXd::Ones(2, 2));
  Var prod = matmul(x, p);
  CHECK_THROWS_AS(g.backward(sum(prod)), DataError);
  CHECK_THROWS_AS(g.forward({}, {}), DataError);
  g.forward({{"x", Eigen::MatrixXd::Ones(3, 2)}}, {});
  CHECK_THROWS_AS(g.backward(prod), DataError);
  CHECK_THROWS_AS(g.forward({{"x", Eigen::MatrixXd::Ones(3, 3)}}, {}), DataError);
  Graph other;
  Var foreign = other.input("y");
  CHECK_THROWS_AS(matmul(x, foreign), DataError);
}

TEST_CASE("adam applies the bias-corrected update") {
  Eigen::MatrixXd w(1, 3);
  w << 1.0, -2.0, 0.5;
  Eigen::MatrixXd grad(1, 3);
  grad << 0.2, -4.0, 0.0;
  AdamState state;
  state.learning_rate = 0.1;
  adam_step({&w}, {&grad}, state);
  // After one step m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(w(0, 0) == doctest::Approx(1.0 - 0.1 * 0.2 / (0.2 + 1e-8)).epsilon(1e-14));
  CHECK(w(0, 1) == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(w(0, 2) == 0.5);

  // Second step against a hand recursion.
  const double g2 = 1.0;
  grad << g2, g2, g2;
  const double m = 0.1 * 0.2 * 0.9 + 0.1 * g2;  // beta1 m + (1 - beta1) g
  const double v = 0.999 * 0.001 * 0.04 + 0.001 * g2 * g2;
  const double expected = w(0, 0) - 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  adam_step({&w}, {&grad}, state);
  CHECK(w(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(state.step == 2);
}

TEST_CASE("checkpoints round-trip bit-exactly and reject corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "s2wtm_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto path = dir / "model.bin";
  RngStream rng(12);
  NamedTensors tensors{{"w", Tensor::matrix(random_matrix(3, 4, rng))},
                       {"b", Tensor::vector(Eigen::VectorXd::LinSpaced(4, -1, 1))},
                       {"s", Tensor::scalar(std::nextafter(1.0, 2.0))}};
  save_checkpoint(path, tensors);
  const NamedTensors back = load_checkpoint(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].first == tensors[i].first);
    CHECK(back[i].second.shape == tensors[i].second.shape);
    CHECK(back[i].second.values == tensors[i].second.values);
  }

  {
    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "NOTACKPT";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.bin"), DataError);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::copy_file(path, dir / "short.bin", std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "short.bin", size - 5);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), DataError);
  std::filesystem::remove_all(dir);
}
