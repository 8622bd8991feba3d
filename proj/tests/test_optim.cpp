#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "rtpinn/losses.hpp"
#include "rtpinn/optim.hpp"
#include "support.hpp"

using namespace rtpinn;

namespace {

// 0.5 (x - c)' A (x - c) with A symmetric positive definite.
struct Quadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd c;
  explicit Quadratic(int n, unsigned seed, double spread = 10.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = u(rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    const Eigen::MatrixXd Q = qr.householderQ();
    Eigen::VectorXd eig(n);
    for (int i = 0; i < n; ++i) eig(i) = 1.0 + (spread - 1.0) * i / std::max(1, n - 1);
    A = Q * eig.asDiagonal() * Q.transpose();
    c.resize(n);
    for (int i = 0; i < n; ++i) c(i) = u(rng);
  }
  LossGradFn fn() const {
    return [this](std::span<const double> th, std::span<double> g) {
      const Eigen::Map<const Eigen::VectorXd> x(th.data(), th.size());
      const Eigen::VectorXd r = x - c;
      const Eigen::VectorXd ar = A * r;
      if (!g.empty()) Eigen::Map<Eigen::VectorXd>(g.data(), g.size()) = ar;
      return 0.5 * r.dot(ar);
    };
  }
};

LossGradFn rosenbrock() {
  return [](std::span<const double> t, std::span<double> g) {
    const double a = 1.0 - t[0], b = t[1] - t[0] * t[0];
    if (!g.empty()) {
      g[0] = -2.0 * a - 400.0 * t[0] * b;
      g[1] = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
}

double grad_norm(const LossGradFn& f, const std::vector<double>& x) {
  std::vector<double> g(x.size());
  f(x, g);
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("configs validate their ranges") {
  AdamConfig a;
  a.beta1 = 1.0;
  CHECK_THROWS_AS(a.validate(), std::invalid_argument);
  LbfgsConfig l;
  l.memory = 0;
  CHECK_THROWS_AS(l.validate(), std::invalid_argument);
  StopRule s;
  s.lbfgs_grad_tol = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("first Adam step moves every active coordinate by lr") {
  const std::vector<double> theta{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> grad{0.3, -7.0, 0.0, 1e-3};
  const LossGradFn f = [&](std::span<const double> th, std::span<double> g) {
    double s = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) s += grad[i] * th[i];
    if (!g.empty()) std::copy(grad.begin(), grad.end(), g.begin());
    return s + 100.0;
  };
  AdamConfig cfg;
  const auto r = adam_run(f, theta, cfg, 1, 0.0);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double step = std::abs(r.theta[i] - theta[i]);
    if (grad[i] == 0.0)
      CHECK(step == 0.0);
    else
      CHECK(step == doctest::Approx(cfg.lr).epsilon(1e-4));
  }
}

TEST_CASE("Adam converges on a quadratic") {
  const Quadratic q(8, 3, 4.0);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  const auto r = adam_run(q.fn(), std::vector<double>(8, 0.0), cfg, 5000, 1e-6);
  CHECK(r.status == OptStatus::kConverged);
  CHECK(r.loss < 1e-6);
  CHECK(r.iterations <= 5000);
  CHECK(r.history.size() == static_cast<std::size_t>(r.iterations) + 1);
}

TEST_CASE("Adam leaves parameters unchanged under a zero gradient") {
  const LossGradFn f = [](std::span<const double>, std::span<double> g) {
    for (auto& x : g) x = 0.0;
    return 1.0;
  };
  const std::vector<double> theta{0.1, 0.2};
  const auto r = adam_run(f, theta, {}, 50, 0.0);
  CHECK(r.theta == theta);
}

TEST_CASE("Adam steps are invariant under gradient rescaling") {
  const Quadratic q(6, 9);
  const auto base = q.fn();
  const LossGradFn scaled = [&](std::span<const double> th, std::span<double> g) {
    const double v = base(th, g);
    for (auto& x : g) x *= 1e3;
    return 1e3 * v;
  };
  AdamConfig cfg;
  cfg.eps = 1e-12;
  const std::vector<double> x0(6, 0.25);
  const auto a = adam_run(base, x0, cfg, 25, 0.0);
  const auto b = adam_run(scaled, x0, cfg, 25, 0.0);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const double da = a.theta[i] - x0[i], db = b.theta[i] - x0[i];
    CHECK(std::abs(da - db) <= 1e-6 * std::abs(da));
  }
}

TEST_CASE("Adam reports non-finite losses with the iteration") {
  const LossGradFn f = [](std::span<const double> th, std::span<double> g) {
    if (!g.empty()) g[0] = 1.0;
    return th[0] < 0.9995 ? std::numeric_limits<double>::quiet_NaN() : th[0];
  };
  try {
    adam_run(f, {1.0}, {}, 10, 0.0);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(e.iteration() == 1);
  }
}

TEST_CASE("L-BFGS solves a strictly convex quadratic") {
  const Quadratic q(10, 5);
  const auto r = lbfgs_run(q.fn(), std::vector<double>(10, 0.0), {}, 30, 1e-10);
  CHECK(r.status == OptStatus::kConverged);
  CHECK(r.grad_norm < 1e-10);
  CHECK(r.iterations <= 30);
}

TEST_CASE("L-BFGS stops immediately at the minimizer") {
  const Quadratic q(4, 2);
  const std::vector<double> x(q.c.data(), q.c.data() + 4);
  const auto r = lbfgs_run(q.fn(), x, {}, 100, 1e-8);
  CHECK(r.iterations == 0);
  CHECK(r.status == OptStatus::kConverged);
  CHECK(r.theta == x);
}

TEST_CASE("L-BFGS minimizes the Rosenbrock function") {
  const auto r = lbfgs_run(rosenbrock(), {-1.2, 1.0}, {}, 200, 1e-12);
  CHECK(r.loss < 1e-8);
  CHECK(r.iterations <= 200);
}

TEST_CASE("every accepted L-BFGS step satisfies the Armijo condition") {
  LbfgsConfig cfg;
  const auto r = lbfgs_run(rosenbrock(), {-1.2, 1.0}, cfg, 200, 1e-12);
  REQUIRE(!r.line_searches.empty());
  for (const auto& ls : r.line_searches) {
    if (ls.fallback) continue;
    CHECK(ls.slope < 0.0);
    CHECK(ls.f1 <= ls.f0 + cfg.c1 * ls.step * ls.slope);
  }
}

TEST_CASE("L-BFGS with unbounded memory reproduces BFGS iterates") {
  const int n = 5;
  const Quadratic q(n, 17, 30.0);
  const auto f = q.fn();
  LbfgsConfig cfg;
  cfg.memory = 1000;
  cfg.scale_initial = false;
  const std::vector<double> x0(n, 1.0);

  // Dense inverse-Hessian BFGS with H0 = I and the same Armijo search.
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
  std::vector<double> gbuf(n);
  const auto eval = [&](const Eigen::VectorXd& p, Eigen::VectorXd& g) {
    const double v = f(std::span<const double>(p.data(), n), gbuf);
    g = Eigen::Map<Eigen::VectorXd>(gbuf.data(), n);
    return v;
  };
  Eigen::VectorXd g;
  double fx = eval(x, g);
  for (int k = 1; k <= 10; ++k) {
    if (g.norm() < 1e-14) break;
    const Eigen::VectorXd d = -H * g;
    const double slope = g.dot(d);
    double t = 1.0;
    Eigen::VectorXd xt, gt;
    double ft = 0.0;
    for (int b = 0; b < cfg.max_backtracks; ++b, t *= cfg.shrink) {
      xt = x + t * d;
      ft = eval(xt, gt);
      if (ft <= fx + cfg.c1 * t * slope) break;
    }
    const Eigen::VectorXd s = xt - x, y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = xt, g = gt, fx = ft;

    const auto r = lbfgs_run(f, x0, cfg, k, 1e-14);
    if (r.iterations < k) break;
    for (int i = 0; i < n; ++i) CHECK(std::abs(r.theta[i] - x(i)) <= 1e-10 * std::max(1.0, std::abs(x(i))));
  }
}

TEST_CASE("two-phase schedule hands the Adam iterate to L-BFGS") {
  const Quadratic q(6, 4);
  const std::vector<double> x0(6, 0.0);
  const auto pure = lbfgs_run(q.fn(), x0, {}, 50, 1e-9);
  StopRule s;
  s.adam_loss_tol = std::numeric_limits<double>::infinity();
  s.max_iter_lbfgs = 50;
  s.lbfgs_grad_tol = 1e-9;
  const auto a = two_phase_train(q.fn(), x0, {}, {}, s);
  CHECK(a.theta == pure.theta);
  s.adam_loss_tol = 0.005;
  s.max_iter_adam = 0;
  const auto b = two_phase_train(q.fn(), x0, {}, {}, s);
  CHECK(b.theta == pure.theta);
  CHECK(b.history.front().phase == "lbfgs");

  s.max_iter_adam = 100;
  const auto c = two_phase_train(q.fn(), x0, {}, {}, s);
  CHECK(c.history.front().phase == "adam");
  CHECK(c.history.back().phase == "lbfgs");
  CHECK(grad_norm(q.fn(), c.theta) < 1e-9);
}

TEST_CASE("error monitor runs at the configured cadence") {
  const Quadratic q(3, 1);
  TrainHooks h;
  int calls = 0;
  h.error = [&](std::span<const double>) {
    ++calls;
    return 0.5;
  };
  h.error_every = 10;
  AdamConfig cfg;
  const auto r = adam_run(q.fn(), {0.0, 0.0, 0.0}, cfg, 35, 0.0, h);
  CHECK(calls == 4);
  CHECK(r.history[10].rel_error == 0.5);
  CHECK(std::isnan(r.history[11].rel_error));
}

TEST_CASE("two-phase training drives the toy macro-micro loss down") {
  const auto sp = testsupport::toy_problem(1e-3);
  const auto ts = make_training_set(sp, testsupport::toy_training(40, 20, 20));
  ParamLayout layout;
  const int r = layout.add(make_mlp_spec(1, 2, 16, 1, OutputActivation::kSoftplus));
  const int g = layout.add(make_mlp_spec(2, 2, 16, 1, OutputActivation::kIdentity));
  const LossModel model(layout, [&](LossTape& t, std::span<const double> th) {
    return macro_micro_loss(sp, ts, *layout.network(r, th), *layout.network(g, th), t, false);
  });
  StopRule stop;
  stop.max_iter_adam = 2000;
  stop.max_iter_lbfgs = 1500;
  const auto res = two_phase_train(model.loss_grad(), layout.init(1), {}, {}, stop);
  CHECK(res.loss < 1e-5);
}
