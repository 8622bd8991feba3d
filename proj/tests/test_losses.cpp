#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rtpinn/boundary_layer.hpp"
#include "rtpinn/experiments.hpp"
#include "rtpinn/fdm.hpp"
#include "rtpinn/losses.hpp"
#include "support.hpp"

using namespace rtpinn;
using testsupport::function;
using testsupport::J;

namespace {

LossBreakdown eval_vanilla(const ProblemSpec& sp, const TrainingSet& ts, const Approximant& f) {
  LossTape t;
  return vanilla_loss(sp, ts, f, t).breakdown();
}

LossBreakdown eval_mm(const ProblemSpec& sp, const TrainingSet& ts, const Approximant& r, const Approximant& g,
                      bool mean) {
  LossTape t;
  return macro_micro_loss(sp, ts, r, g, t, mean).breakdown();
}

void check_breakdown(const LossBreakdown& b) {
  double s = 0.0;
  for (const auto& t : b.terms) {
    CHECK(t.value >= 0.0);
    s += t.value;
  }
  CHECK(std::abs(s - b.total) <= 1e-14 * std::max(std::abs(b.total), 1e-300));
}

// An untrained corrector: enough structure for gradient and equivalence checks.
HalfSpaceSolution untrained_halfspace(int dim, std::uint64_t seed, double f_inf) {
  HalfSpaceSolution s;
  s.dim = dim;
  s.net.spec = make_mlp_spec(2, 2, 8, 1, OutputActivation::kScaledSigmoid, 2.0);
  s.net.params = init_params(s.net.spec, seed);
  s.f_inf = f_inf;
  return s;
}

// Monomial-in-v candidate g = v c1 + (v^2 - 1/3) h(x): <g> = 0 and <v g_x> = 0.
J mean_free_g(std::span<const J> in) {
  const J& x = in[0];
  const J& v = in[1];
  return 0.7 * v + (v * v - 1.0 / 3.0) * sin(2.0 * x);
}

}  // namespace

TEST_CASE("vanilla loss vanishes on the exact toy solution") {
  for (double eps : {1.0, 1e-3}) {
    const auto sp = testsupport::toy_problem(eps);
    const auto ts = make_training_set(sp, testsupport::toy_training());
    const auto f = function(2, [](std::span<const J> in) { return 1.0 - in[0]; });
    const auto b = eval_vanilla(sp, ts, *f);
    CHECK(b.total < 1e-12);
    check_breakdown(b);
  }
}

TEST_CASE("vanilla loss of (1-x)^2 has the closed-form value") {
  const double eps = 1e-3;
  const auto sp = testsupport::toy_problem(eps);
  auto tc = testsupport::toy_training();
  tc.x_kind = RuleKind::kGaussLegendre;
  const auto ts = make_training_set(sp, tc);
  const auto f = function(2, [](std::span<const J> in) { return (1.0 - in[0]) * (1.0 - in[0]); });
  const auto b = eval_vanilla(sp, ts, *f);
  const double expect = eps * eps / 9.0;
  CHECK(std::abs(b.total - expect) <= 1e-4 * expect);
  CHECK(b.term("boundary_left") < 1e-28);
  CHECK(b.term("boundary_right") < 1e-28);
}

TEST_CASE("zero candidates on zero data give zero loss") {
  ProblemSpec sp;
  sp.epsilon = 1e-2;
  const auto ts = make_training_set(sp, testsupport::toy_training(20, 10, 10));
  const auto z1 = constant_function(1, 0.0), z2 = constant_function(2, 0.0);
  CHECK(eval_vanilla(sp, ts, *z2).total == 0.0);
  CHECK(eval_mm(sp, ts, *z1, *z2, true).total == 0.0);
  NonlinearConstants k;
  k.t_left = k.t_right = 0.0;
  LossTape t;
  CHECK(nonlinear_loss(sp, ts, *z1, *z2, *z1, k, t).breakdown().total == 0.0);
}

TEST_CASE("macro-micro loss vanishes on the exact toy decomposition") {
  for (double eps : {1.0, 1e-2, 1e-3}) {
    const auto sp = testsupport::toy_problem(eps);
    const auto ts = make_training_set(sp, testsupport::toy_training());
    const auto rho = function(1, [](std::span<const J> in) { return 1.0 - in[0]; });
    const auto b = eval_mm(sp, ts, *rho, *constant_function(2, 0.0), false);
    CHECK(b.total < 1e-12);
    CHECK(!b.has("mean"));
    check_breakdown(b);
    CHECK(eval_mm(sp, ts, *rho, *constant_function(2, 0.0), true).has("mean"));
  }
}

TEST_CASE("macro-micro loss vanishes on the 2D analytic solution") {
  // The source makes f = exp(-x - y) exact for every epsilon; f is
  // velocity independent, so rho = f and the micro part is zero.
  const auto cfg = default_config("ex5.2");
  const auto sp = make_problem(cfg);
  TrainingConfig tc;
  tc.nx = tc.ny = tc.nv = 40;
  tc.nb = 10;
  const auto ts = make_training_set(sp, tc);
  const auto rho = function(2, [](std::span<const J> in) { return exp(-(in[0] + in[1])); });
  const auto b = eval_mm(sp, ts, *rho, *constant_function(3, 0.0), true);
  CHECK(b.total < 1e-8);
  CHECK(b.terms.size() == 7u);  // macro, mean, four faces, micro
  check_breakdown(b);
}

TEST_CASE("training set boundary samples lie in the inflow cone") {
  for (const char* id : {"ex5.6", "ex5.2"}) {
    const auto cfg = default_config(id);
    const auto sp = make_problem(cfg);
    const auto ts = make_training_set(sp, cfg.train);
    CHECK(ts.faces.size() == static_cast<std::size_t>(sp.num_faces()));
    for (const auto& fs : ts.faces) {
      double wsum = 0.0;
      for (std::size_t q = 0; q < fs.size(); ++q) {
        CHECK(sp.is_inflow(fs.face, fs.v[q]));
        wsum += fs.weight[q];
      }
      const double length = sp.dim == 1 ? 1.0 : 2.0;
      CHECK(wsum == doctest::Approx(length).epsilon(1e-12));
    }
  }
}

TEST_CASE("corrected loss with a zero corrector reduces to the macro-micro loss") {
  SUBCASE("1D") {
    auto cfg = default_config("ex5.6");
    cfg.epsilon = 1.0;
    const auto sp = make_problem(cfg);
    const auto ts = make_training_set(sp, testsupport::toy_training(30, 16, 16));
    const auto rho = function(1, [](std::span<const J> in) { return 2.0 + sin(in[0]); });
    const auto g = function(2, mean_free_g);
    LossTape t;
    const auto a = bl_corrected_loss_1d(sp, ts, *rho, *g, *constant_function(2, 0.0), t).breakdown();
    const auto b = eval_mm(sp, ts, *rho, *g, true);
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-14));
    CHECK(a.total > 0.0);
  }
  SUBCASE("2D") {
    auto cfg = default_config("ex5.9");
    cfg.epsilon = 1.0;
    const auto sp = make_problem(cfg);
    TrainingConfig tc;
    tc.nx = tc.ny = 12;
    tc.nv = 16;
    tc.nb = 4;
    const auto ts = make_training_set(sp, tc);
    const auto rho = function(2, [](std::span<const J> in) { return 1.0 + in[0] * in[1]; });
    const auto g = function(3, [](std::span<const J> in) { return cos(in[2]) * in[1]; });
    LossTape t;
    const auto a = bl_corrected_loss_2d(sp, ts, *rho, *g, *constant_function(3, 0.0), t).breakdown();
    const auto b = eval_mm(sp, ts, *rho, *g, true);
    CHECK(a.total == doctest::Approx(b.total).epsilon(1e-14));
  }
}

TEST_CASE("heterogeneous Knudsen number") {
  const auto cfg = default_config("ex5.3");
  const auto sp = make_problem(cfg);
  CHECK(sp.eps_at(0.5) == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
  // Derivative of eps(x) against a central difference.
  const double h = 1e-6;
  CHECK(sp.epsilon_dx(0.3) == doctest::Approx((sp.eps_at(0.3 + h) - sp.eps_at(0.3 - h)) / (2 * h)).epsilon(1e-7));

  const auto ts = make_training_set(sp, testsupport::toy_training(40, 20, 20));
  // Constant candidates: residuals vanish and the boundary part is quadratic in c.
  auto loss_at = [&](double c) {
    LossTape t;
    const auto b = hetero_eps_loss(sp, ts, *constant_function(1, c), *constant_function(2, 0.0), t).breakdown();
    CHECK(b.term("macro") == 0.0);
    CHECK(b.term("micro") == 0.0);
    return b.total;
  };
  const double l0 = loss_at(0.0), l1 = loss_at(1.0), l2 = loss_at(2.0);
  const double a2 = 0.5 * (l2 - 2.0 * l1 + l0), a1 = l1 - l0 - a2;
  CHECK(-a1 / (2.0 * a2) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("heterogeneous loss with b = 0 is the kinetic macro-micro loss") {
  auto cfg = default_config("ex5.3");
  cfg.hetero_b = 0.0;
  const auto sp = make_problem(cfg);
  for (double x : {0.0, 0.4, 1.0}) CHECK(sp.eps_at(x) == 1.0);
  auto plain = sp;
  plain.epsilon_x = nullptr;
  plain.epsilon_dx = nullptr;
  plain.epsilon = 1.0;
  const auto ts = make_training_set(sp, testsupport::toy_training(30, 20, 20));
  const auto rho = function(1, [](std::span<const J> in) { return 3.0 - 2.0 * in[0] * in[0]; });
  const auto g = function(2, mean_free_g);
  LossTape t;
  const auto a = hetero_eps_loss(sp, ts, *rho, *g, t).breakdown();
  const auto b = eval_mm(plain, ts, *rho, *g, false);
  CHECK(a.total == doctest::Approx(b.total).epsilon(1e-12));
  CHECK(a.term("micro") == doctest::Approx(b.term("micro")).epsilon(1e-12));
}

TEST_CASE("nonlinear loss residuals vanish on the diffusion limit") {
  const NonlinearConstants k;
  const double kappa = k.kappa();
  auto cfg = default_config("ex5.8");
  cfg.epsilon = 1e-3;
  const auto sp = make_problem(cfg);
  const auto ts = make_training_set(sp, testsupport::toy_training(80, 30, 30));
  // T0 and its derivatives through the implicit relation kappa T^4 + T = (kappa + 1)(1 - x).
  struct T0 {
    double t, t1, t2;
  };
  auto t0 = [kappa](double x) {
    const double t = nonlinear_limit_solve(kappa, {x})[0];
    const double den = 4.0 * kappa * t * t * t + 1.0;
    const double t1 = -(kappa + 1.0) / den;
    const double t2 = -12.0 * kappa * t * t * t1 * t1 / den;
    return T0{t, t1, t2};
  };
  const double ac = k.a * k.c;
  const auto temp = function(1, [&](std::span<const J> in) {
    const auto s = t0(in[0].value);
    return compose(in[0], s.t, s.t1, s.t2);
  });
  const auto rho = function(1, [&](std::span<const J> in) {
    const auto s = t0(in[0].value);
    return ac * pow(compose(in[0], s.t, s.t1, s.t2), 4);
  });
  // g = -v rho_x / sigma.
  const auto g = function(2, [&](std::span<const J> in) {
    const auto s = t0(in[0].value);
    const double t3 = s.t * s.t * s.t;
    const double rx = 4.0 * ac * t3 * s.t1;
    const double rxx = 4.0 * ac * (3.0 * s.t * s.t * s.t1 * s.t1 + t3 * s.t2);
    J r = J::constant(-rx / k.sigma, in[0].n);
    for (int c = 0; c < in[0].n; ++c) r.d1[c] = -rxx / k.sigma * in[0].d1[c];
    return r * in[1];
  });
  LossTape t;
  const auto b = nonlinear_loss(sp, ts, *rho, *g, *temp, k, t).breakdown();
  CHECK(b.term("macro") < 1e-3);
  CHECK(b.term("temperature") < 1e-3);
  CHECK(b.term("temperature_left") < 1e-20);
  CHECK(b.term("temperature_right") < 1e-20);
  check_breakdown(b);
}

TEST_CASE("loss gradients match central differences") {
  const auto s1 = make_mlp_spec(1, 2, 10, 1, OutputActivation::kSoftplus);
  const auto s2 = make_mlp_spec(2, 2, 10, 1, OutputActivation::kIdentity);
  const auto s3 = make_mlp_spec(3, 2, 8, 1, OutputActivation::kIdentity);

  struct Case {
    const char* name;
    ProblemSpec sp;
    TrainingConfig tc;
  };
  TrainingConfig small1 = testsupport::toy_training(12, 8, 6);
  TrainingConfig small2;
  small2.nx = small2.ny = 6;
  small2.nv = 8;
  small2.nb = 3;

  const auto toy = testsupport::toy_problem(1e-2);
  const auto ts1 = make_training_set(toy, small1);
  auto run = [&](const char* name, const ParamLayout& layout, const LossModel::Builder& build) {
    const LossModel m(layout, build);
    const auto theta = layout.init(3);
    double worst = 0.0;
    for (int d = 0; d < 20; ++d) worst = std::max(worst, testsupport::directional_check(m.loss_grad(), theta, 500 + d).rel());
    INFO(name);
    CHECK(worst < 1e-5);
  };

  {
    ParamLayout l;
    const int f = l.add(s2);
    run("vanilla", l, [&](LossTape& t, std::span<const double> th) { return vanilla_loss(toy, ts1, *l.network(f, th), t); });
  }
  {
    ParamLayout l;
    const int r = l.add(s1), g = l.add(s2);
    run("macro-micro", l, [&](LossTape& t, std::span<const double> th) {
      return macro_micro_loss(toy, ts1, *l.network(r, th), *l.network(g, th), t, true);
    });
  }
  {
    auto cfg = default_config("ex5.6");
    cfg.epsilon = 0.05;
    const auto sp = make_problem(cfg);
    const auto ts = make_training_set(sp, small1);
    const GammaCorrector gamma(untrained_halfspace(1, 8, 0.4), cfg.epsilon);
    ParamLayout l;
    const int r = l.add(s1), g = l.add(s2);
    run("corrected 1D", l, [&](LossTape& t, std::span<const double> th) {
      return bl_corrected_loss_1d(sp, ts, *l.network(r, th), *l.network(g, th), gamma, t);
    });
  }
  {
    auto cfg = default_config("ex5.9");
    cfg.epsilon = 0.1;
    const auto sp = make_problem(cfg);
    const auto ts = make_training_set(sp, small2);
    std::vector<HalfSpaceSolution> sols;
    for (int j = 0; j < 5; ++j) sols.push_back(untrained_halfspace(2, 20 + j, 0.1 * j));
    const GammaCorrector gamma(sols, {-1.0, -0.5, 0.0, 0.5, 1.0}, cfg.epsilon);
    ParamLayout l;
    const int r = l.add(make_mlp_spec(2, 2, 8, 1, OutputActivation::kSoftplus)), g = l.add(s3);
    run("corrected 2D", l, [&](LossTape& t, std::span<const double> th) {
      return bl_corrected_loss_2d(sp, ts, *l.network(r, th), *l.network(g, th), gamma, t);
    });
  }
  {
    const auto sp = make_problem(default_config("ex5.3"));
    const auto ts = make_training_set(sp, small1);
    ParamLayout l;
    const int r = l.add(s1), g = l.add(s2);
    run("heterogeneous", l, [&](LossTape& t, std::span<const double> th) {
      return hetero_eps_loss(sp, ts, *l.network(r, th), *l.network(g, th), t);
    });
  }
  {
    auto cfg = default_config("ex5.8");
    cfg.epsilon = 0.1;
    const auto sp = make_problem(cfg);
    const auto ts = make_training_set(sp, small1);
    ParamLayout l;
    const int r = l.add(s1), g = l.add(s2), tt = l.add(s1);
    run("nonlinear", l, [&](LossTape& t, std::span<const double> th) {
      return nonlinear_loss(sp, ts, *l.network(r, th), *l.network(g, th), *l.network(tt, th), NonlinearConstants{}, t);
    });
  }
  {
    auto cfg = default_config("ex5.4");
    const auto sp = make_problem(cfg);
    const auto ts = make_training_set(sp, small2);
    ParamLayout l;
    const int r = l.add(make_mlp_spec(2, 2, 8, 1, OutputActivation::kSoftplus)), g = l.add(s3);
    run("anisotropic macro-micro", l, [&](LossTape& t, std::span<const double> th) {
      return macro_micro_loss(sp, ts, *l.network(r, th), *l.network(g, th), t, true);
    });
  }
}
