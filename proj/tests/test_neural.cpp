#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rtpinn/approximant.hpp"
#include "rtpinn/autodiff.hpp"
#include "rtpinn/mlp.hpp"
#include "rtpinn/mlp_batch.hpp"

using namespace rtpinn;

namespace {

std::vector<double> eval(const ParamVector& p, const MlpSpec& s, std::vector<double> u) {
  return forward<double, double>(p, s, u);
}

// d1 and d2 of output 0 in input coordinate k by fourth-order central
// differences (round-off stays far below small second derivatives).
std::pair<double, double> central(const ParamVector& p, const MlpSpec& s, std::vector<double> u, int k) {
  auto at = [&](double h) {
    auto v = u;
    v[k] += h;
    return eval(p, s, v)[0];
  };
  const double h1 = 1e-3, h2 = 1e-2;
  const double d1 = (8.0 * (at(h1) - at(-h1)) - (at(2.0 * h1) - at(-2.0 * h1))) / (12.0 * h1);
  const double d2 = (16.0 * (at(h2) + at(-h2)) - (at(2.0 * h2) + at(-2.0 * h2)) - 30.0 * at(0.0)) / (12.0 * h2 * h2);
  return {d1, d2};
}

}  // namespace

TEST_CASE("parameter count and layout") {
  const auto s = make_mlp_spec(2, 4, 50, 1, OutputActivation::kIdentity);
  CHECK(s.num_params() == 3u * 50u + 3u * 51u * 50u + 51u);
  const auto layout = layer_layout(s);
  REQUIRE(layout.size() == 5);
  CHECK(layout[0].weight_offset == 0u);
  CHECK(layout[0].bias_offset == 100u);
  CHECK(layout.back().bias_offset + 1 == s.num_params());
}

TEST_CASE("invalid specs are rejected") {
  MlpSpec s;
  s.widths = {4, 3, 1};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.widths = {1, 0, 1};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.widths = {1, 3, 1};
  s.output = OutputActivation::kScaledSigmoid;
  s.c_a = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(parse_output_activation("relu"), std::invalid_argument);
  CHECK(parse_output_activation(to_string(OutputActivation::kSoftplus)) == OutputActivation::kSoftplus);
}

TEST_CASE("initialization is reproducible from the seed") {
  const auto s = make_mlp_spec(2, 3, 20, 1, OutputActivation::kIdentity);
  CHECK(init_params(s, 5) == init_params(s, 5));
  CHECK(init_params(s, 5) != init_params(s, 6));
}

TEST_CASE("Glorot initialization: bounded weights, zero biases, centered mean") {
  const auto s = make_mlp_spec(3, 2, 100, 1, OutputActivation::kIdentity);
  const auto p = init_params(s, 11);
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& l : layer_layout(s)) {
    const double bound = std::sqrt(6.0 / (l.in + l.out));
    for (int i = 0; i < l.in * l.out; ++i) {
      const double w = p[l.weight_offset + i];
      CHECK(std::abs(w) <= bound);
      sum += w / bound;  // normalized to U(-1, 1)
      ++count;
    }
    for (int o = 0; o < l.out; ++o) CHECK(p[l.bias_offset + o] == 0.0);
  }
  REQUIRE(count >= 10000u);
  const double sigma = 1.0 / std::sqrt(3.0);
  CHECK(std::abs(sum / count) < 3.0 * sigma / std::sqrt(static_cast<double>(count)));
}

TEST_CASE("zero parameters give the output activation of zero") {
  for (auto act : {OutputActivation::kIdentity, OutputActivation::kSoftplus, OutputActivation::kScaledSigmoid}) {
    const auto s = make_mlp_spec(2, 2, 8, 1, act, 5.0);
    const ParamVector p(s.num_params(), 0.0);
    const double expect = act == OutputActivation::kIdentity ? 0.0 : act == OutputActivation::kSoftplus ? std::log(2.0) : 2.5;
    for (double x : {-1.0, 0.3, 2.0}) CHECK(eval(p, s, {x, -x})[0] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("single affine layer") {
  MlpSpec s;
  s.widths = {1, 1};
  const ParamVector p{2.5, -0.75};
  CHECK(eval(p, s, {3.0})[0] == doctest::Approx(2.5 * 3.0 - 0.75));
  s.output = OutputActivation::kSoftplus;
  CHECK(eval(ParamVector{0.0, 0.0}, s, {1.0})[0] == doctest::Approx(std::log(2.0)));
  s.output = OutputActivation::kScaledSigmoid;
  s.c_a = 5.0;
  CHECK(eval(ParamVector{0.0, 0.0}, s, {1.0})[0] == doctest::Approx(2.5));
}

TEST_CASE("input dimension mismatch is an error") {
  const auto s = make_mlp_spec(2, 1, 4, 1, OutputActivation::kIdentity);
  const auto p = init_params(s, 1);
  CHECK_THROWS_AS(eval(p, s, {1.0}), std::invalid_argument);
  const std::vector<double> u{1.0, 2.0, 3.0};
  const int act[1] = {0};
  CHECK_THROWS_AS((forward_jet<double, double>(p, s, u, act, 1)), std::invalid_argument);
}

TEST_CASE("jet of tanh at zero") {
  MlpSpec s;
  s.widths = {1, 1, 1};
  const ParamVector p{1.0, 0.0, 1.0, 0.0};  // W1, b1, W2, b2
  const std::vector<double> u{0.0};
  const int act[1] = {0};
  const auto j = forward_jet<double, double>(p, s, u, act, 2)[0];
  CHECK(j.value == 0.0);
  CHECK(j.d1[0] == doctest::Approx(1.0));
  CHECK(j.d2[0] == 0.0);
}

TEST_CASE("jet arithmetic follows the product and chain rules") {
  using J = Jet2<double>;
  const J x = J::variable(1.7, 0, 1);
  const J sq = x * x;
  CHECK(sq.d1[0] == doctest::Approx(3.4));
  CHECK(sq.d2[0] == doctest::Approx(2.0));
  const J e = exp(x) * sin(x) / (1.0 + x * x);
  auto f = [](double t) { return std::exp(t) * std::sin(t) / (1.0 + t * t); };
  const double h = 1e-4;
  CHECK(e.d1[0] == doctest::Approx((f(1.7 + h) - f(1.7 - h)) / (2 * h)).epsilon(1e-7));
  CHECK(e.d2[0] == doctest::Approx((f(1.7 + h) - 2 * f(1.7) + f(1.7 - h)) / (h * h)).epsilon(1e-5));
  const J p4 = pow(x, 4);
  CHECK(p4.d2[0] == doctest::Approx(12.0 * 1.7 * 1.7));
  CHECK_THROWS_AS(pow(x, -1), std::invalid_argument);
}

TEST_CASE("input jets of random networks match finite differences") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const OutputActivation acts[3] = {OutputActivation::kIdentity, OutputActivation::kSoftplus,
                                    OutputActivation::kScaledSigmoid};
  double worst1 = 0.0, worst2 = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 3;
    const int layers = 1 + trial % 4;
    const int width = trial % 10 == 0 ? 50 : 5 + trial % 17;
    const auto s = make_mlp_spec(dim, layers, width, 1, acts[trial % 3], 3.0);
    const auto p = init_params(s, 100 + trial);
    std::vector<double> x(dim);
    for (auto& c : x) c = u(rng);
    std::vector<int> active(dim);
    for (int k = 0; k < dim; ++k) active[k] = k;
    const auto j = forward_jet<double, double>(p, s, x, active, 2)[0];
    CHECK(j.value == doctest::Approx(eval(p, s, x)[0]).epsilon(1e-14));
    for (int k = 0; k < dim; ++k) {
      const auto [d1, d2] = central(p, s, x, k);
      worst1 = std::max(worst1, std::abs(j.d1[k] - d1) / std::abs(d1));
      worst2 = std::max(worst2, std::abs(j.d2[k] - d2) / std::abs(d2));
    }
  }
  CHECK(worst1 < 1e-6);
  CHECK(worst2 < 1e-4);
}

TEST_CASE("batched jets agree with the scalar jet pass") {
  const auto s = make_mlp_spec(3, 3, 17, 2, OutputActivation::kSoftplus);
  const auto p = init_params(s, 9);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(3, 700);
  const std::vector<int> active{0, 2};
  const BatchJet b(s, p, pts, active, 2);
  for (Eigen::Index i = 0; i < pts.cols(); i += 37) {
    const std::vector<double> x{pts(0, i), pts(1, i), pts(2, i)};
    const auto j = forward_jet<double, double>(p, s, x, active, 2);
    for (int o = 0; o < 2; ++o) {
      CHECK(b.value()(o, i) == doctest::Approx(j[o].value).epsilon(1e-13));
      for (int k = 0; k < 2; ++k) {
        CHECK(b.d1(k)(o, i) == doctest::Approx(j[o].d1[k]).epsilon(1e-12));
        CHECK(b.d2(k)(o, i) == doctest::Approx(j[o].d2[k]).epsilon(1e-11));
      }
    }
  }
}

TEST_CASE("tape gradient at zero weights is nonzero only in the output bias") {
  const auto s = make_mlp_spec(2, 2, 6, 1, OutputActivation::kSoftplus);
  const ParamVector zero(s.num_params(), 0.0);
  const auto r = ad::grad_params(
      [&](std::span<const ad::Var> th) {
        const std::vector<ad::Var> u{ad::Var(0.4), ad::Var(-0.2)};
        const auto out = forward<ad::Var, ad::Var>(th, s, u);
        return ad::square(out[0]);
      },
      zero);
  CHECK(r.value == doctest::Approx(std::log(2.0) * std::log(2.0)));
  for (std::size_t i = 0; i + 1 < r.gradient.size(); ++i) CHECK(r.gradient[i] == 0.0);
  CHECK(r.gradient.back() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("constant loss has zero gradient") {
  const std::vector<double> theta{1.0, 2.0, 3.0};
  const auto r = ad::grad_params([](std::span<const ad::Var>) { return ad::Var(4.0); }, theta);
  CHECK(r.value == 4.0);
  for (double g : r.gradient) CHECK(g == 0.0);
}

TEST_CASE("mixing variables from two tapes is an error") {
  ad::Tape t1, t2;
  const ad::Var a(&t1, t1.leaf(), 1.0), b(&t2, t2.leaf(), 2.0);
  CHECK_THROWS_AS(a + b, std::logic_error);
  CHECK_THROWS_AS(t1.adjoints(5), std::logic_error);
}

TEST_CASE("reverse gradients through input jets match directional differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = make_mlp_spec(2, 2 + trial % 2, 12, 1, trial % 2 ? OutputActivation::kSoftplus : OutputActivation::kIdentity);
    const auto theta = init_params(s, 40 + trial);
    const std::vector<int> active{0, 1};
    auto loss = [&](std::span<const ad::Var> th) {
      ad::Var acc(0.0);
      for (double x : {-0.6, 0.1, 0.8}) {
        const std::vector<ad::Var> u{ad::Var(x), ad::Var(0.5 * x + 0.2)};
        const auto j = forward_jet<ad::Var, ad::Var>(th, s, u, active, 2)[0];
        acc = acc + ad::square(j.d1[0] + j.value) + j.d2[1] * j.d1[1];
      }
      return acc;
    };
    const auto r = ad::grad_params(loss, theta);
    std::vector<double> d(theta.size());
    for (auto& c : d) c = n01(rng);
    double an = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) an += r.gradient[i] * d[i];
    const double h = 1e-5;
    auto tp = theta, tm = theta;
    for (std::size_t i = 0; i < d.size(); ++i) tp[i] += h * d[i], tm[i] -= h * d[i];
    const double fd = (ad::grad_params(loss, tp).value - ad::grad_params(loss, tm).value) / (2.0 * h);
    worst = std::max(worst, std::abs(an - fd) / std::abs(fd));
    // Determinism: bit-identical repeat.
    CHECK(ad::grad_params(loss, theta).gradient == r.gradient);
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("batched backward pass matches the scalar tape") {
  const auto s = make_mlp_spec(2, 3, 10, 1, OutputActivation::kSoftplus);
  const auto theta = init_params(s, 3);
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(2, 50);
  const std::vector<int> active{0};
  const BatchJet b(s, theta, pts, active, 2);
  // L = sum over points of value + 2 d1 + 3 d2.
  Eigen::MatrixXd adj(1, 50 * b.streams());
  adj.leftCols(50).setConstant(1.0);
  adj.middleCols(50, 50).setConstant(2.0);
  adj.rightCols(50).setConstant(3.0);
  std::vector<double> g(theta.size(), 0.0);
  b.backward(adj, g);
  const auto r = ad::grad_params(
      [&](std::span<const ad::Var> th) {
        ad::Var acc(0.0);
        for (Eigen::Index i = 0; i < 50; ++i) {
          const std::vector<ad::Var> u{ad::Var(pts(0, i)), ad::Var(pts(1, i))};
          const auto j = forward_jet<ad::Var, ad::Var>(th, s, u, active, 2)[0];
          acc = acc + j.value + 2.0 * j.d1[0] + 3.0 * j.d2[0];
        }
        return acc;
      },
      theta);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(r.gradient[i]).epsilon(1e-10));
}

TEST_CASE("checkpoints round-trip exactly") {
  Checkpoint c;
  c.spec = make_mlp_spec(2, 2, 7, 1, OutputActivation::kScaledSigmoid, 4.25);
  c.params = init_params(c.spec, 77);
  c.params[3] = 1.0 / 3.0;
  c.seed = 77;
  std::stringstream ss;
  write_checkpoint(ss, c);
  const auto back = read_checkpoint(ss);
  CHECK(back.spec.widths == c.spec.widths);
  CHECK(back.spec.output == c.spec.output);
  CHECK(back.spec.c_a == c.spec.c_a);
  CHECK(back.seed == 77u);
  CHECK(back.params == c.params);
  std::istringstream bad("garbage");
  CHECK_THROWS(read_checkpoint(bad));
}
