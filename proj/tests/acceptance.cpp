// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "rtpinn/boundary_layer.hpp"
#include "rtpinn/experiments.hpp"
#include "rtpinn/fdm.hpp"
#include "rtpinn/losses.hpp"

using namespace rtpinn;

namespace {

using J = Jet2<double>;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void criterion(int n, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(secs < time_limit, fmt("%.1f s", secs) + fmt(" (limit %.0f s)", time_limit));
  if (!o.pass) ++failures;
  std::printf("criterion %d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
  std::fflush(stdout);
}

ProblemSpec toy(double eps) {
  ProblemSpec sp;
  sp.epsilon = eps;
  sp.source = [eps](double, double, double v) { return -v / eps; };
  sp.inflow = [](Face f, double, double, double) { return f == Face::kLeft ? 1.0 : 0.0; };
  return sp;
}

TrainingConfig toy_training() {
  TrainingConfig tc;
  tc.nx = 80;
  tc.nv = 60;
  tc.nb = 60;
  return tc;
}

std::shared_ptr<Approximant> function(int dim, std::function<J(std::span<const J>)> fn) {
  return std::make_shared<FunctionApproximant>(dim, std::move(fn));
}

Outcome pitfall() {
  Outcome o;
  const double eps = 1e-3;
  const auto sp = toy(eps);
  const auto ts = make_training_set(sp, toy_training());
  const auto f = function(2, [](std::span<const J> in) { return (1.0 - in[0]) * (1.0 - in[0]); });
  LossTape tape;
  const double loss = vanilla_loss(sp, ts, *f, tape).breakdown().total;
  const double expect = eps * eps / 9.0;
  o.require(std::abs(loss - expect) <= 1e-3 * expect, fmt("loss/(eps^2/9) - 1 = %.2e", loss / expect - 1.0));

  const Mesh m = uniform_mesh_1d(0.0, 1.0, 400, 60);
  Field ref;
  ref.dim = 1;
  ref.x = m.x;
  ref.xw = trapezoid_weights(m.x);
  ref.v = m.v;
  Field cand = ref;
  for (double x : m.x)
    for (std::size_t j = 0; j < m.v.size(); ++j) {
      ref.values.push_back(1.0 - x);
      cand.values.push_back((1.0 - x) * (1.0 - x));
    }
  const double err = relative_l2(cand, ref, true);
  o.require(err >= 0.2, fmt("relative error %.3f", err));
  return o;
}

Outcome annihilation() {
  Outcome o;
  for (double eps : {1.0, 1e-3}) {
    const auto sp = toy(eps);
    const auto ts = make_training_set(sp, toy_training());
    const auto rho = function(1, [](std::span<const J> in) { return 1.0 - in[0]; });
    const auto g = function(2, [](std::span<const J> in) { return 0.0 * in[0]; });
    LossTape tape;
    const double loss = macro_micro_loss(sp, ts, *rho, *g, tape, false).breakdown().total;
    o.require(loss < 1e-12, fmt("eps %.0e: ", eps) + fmt("loss %.1e", loss));
  }
  return o;
}

Outcome stability() {
  Outcome o;
  const auto r = run_stability_sweep(StabilityConfig{});
  o.require(r.mm_spread <= 10.0, fmt("macro-micro spread %.3g", r.mm_spread));
  o.require(r.vanilla_growth >= 100.0, fmt("vanilla growth %.3g", r.vanilla_growth));
  return o;
}

Outcome hfunctions() {
  Outcome o;
  const auto h1 = chandrasekhar_h_1d(128);
  const auto h2 = chandrasekhar_h_2d(128);
  o.require(h1.residual < 1e-8 && h2.residual < 1e-8, fmt("residual %.1e", std::max(h1.residual, h2.residual)));
  const double c = f_bl_infinity_1d([](double) { return 2.5; }, h1);
  o.require(std::abs(c - 2.5) <= 1e-3, fmt("constant 2.5 -> %.6f", c));
  const double s = f_bl_infinity_1d([](double v) { return 5.0 * std::sin(v); }, h1);
  o.require(std::abs(s - 3.1889) <= 1e-3, fmt("5 sin v -> %.5f", s));
  const double a = f_bl_infinity_2d([](double al) { return al; }, h2);
  o.require(std::abs(a - std::numbers::pi) <= 2e-2, fmt("2D at y = 0 -> %.5f", a));
  return o;
}

Outcome trained_toy() {
  Outcome o;
  const auto r = run_experiment(default_config("toy-mm"));
  const double loss = r.metrics.at("final_loss"), err = r.metrics.at("rel_l2_sqrt");
  o.require(loss < 1e-5, fmt("loss %.2e", loss));
  o.require(err < 5e-2, fmt("relative error %.2e", err));
  return o;
}

Outcome fdm_references() {
  Outcome o;
  const Field f = fdm_rte_1d(toy(1.0), uniform_mesh_1d(0.0, 1.0, 200, 40));
  double sup = 0.0;
  for (std::size_t i = 0; i < f.nx(); ++i)
    for (std::size_t j = 0; j < f.nv(); ++j) sup = std::max(sup, std::abs(f.at(i, 0, j) - (1.0 - f.x[i])));
  o.require(sup < 5e-3, fmt("toy sup error %.2e", sup));

  const auto sp = make_problem(default_config("ex5.6"));
  const Field rho = fdm_rte_1d(sp, split_mesh_1d(0.0, 1.0, 1e-3, 150, 50, 80)).density();
  double worst = 0.0;
  for (std::size_t i = 0; i < rho.nx(); ++i) {
    const double x = rho.x[i];
    if (x < 0.1 || x > 0.9) continue;
    const double limit = 3.188 * (1.0 - x);
    worst = std::max(worst, std::abs(rho.values[i] - limit) / limit);
  }
  o.require(worst < 0.02, fmt("boundary-layer density deviation %.2e", worst));
  return o;
}

Outcome halfspace() {
  Outcome o;
  HalfSpaceSpec s;
  s.inflow = [](double v) { return 5.0 * std::sin(v); };
  HalfSpaceTraining t;
  t.stop.max_iter_adam = 1250;
  t.stop.max_iter_lbfgs = 1000;
  const auto sol = solve_halfspace(s, t);
  o.require(std::abs(sol.f_inf - 3.1889) <= 0.02, fmt("far field %.5f", sol.f_inf));
  const double flux = sol.max_flux(20);
  o.require(flux < 1e-3, fmt("max flux %.2e", flux));
  return o;
}

double bisect(double kappa, double target) {
  double lo = 0.0, hi = 2.0;
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (lo + hi);
    (m + kappa * m * m * m * m < target ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

Outcome nonlinear() {
  Outcome o;
  NonlinearFdmSpec s;
  s.epsilon = 1e-3;
  const double kappa = s.a * s.c / (3.0 * s.sigma);
  std::vector<double> x;
  for (int i = 0; i <= 50; ++i) x.push_back(i / 50.0);
  const auto lim = nonlinear_limit_solve(kappa, x);
  double dev = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    dev = std::max(dev, std::abs(lim[i] - bisect(kappa, (kappa + 1.0) * (1.0 - x[i]))));
  o.require(dev < 1e-10, fmt("limit vs bisection %.1e", dev));

  const auto r = fdm_nonlinear_1d(s, uniform_mesh_1d(0.0, 1.0, 200, 40));
  const auto& T = r.temperature;
  const auto tl = nonlinear_limit_solve(kappa, T.x);
  double worst = 0.0;
  for (std::size_t i = 0; i < T.nx(); ++i)
    if (T.x[i] >= 0.1 && T.x[i] <= 0.9) worst = std::max(worst, std::abs(T.values[i] - tl[i]) / tl[i]);
  o.require(worst < 0.02, fmt("transport vs limit %.2e", worst));
  return o;
}

Outcome differentiation() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n01;
  const OutputActivation acts[3] = {OutputActivation::kIdentity, OutputActivation::kSoftplus,
                                    OutputActivation::kScaledSigmoid};
  double w1 = 0.0, w2 = 0.0, wp = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 3;
    const auto spec = make_mlp_spec(dim, 1 + trial % 4, 6 + trial % 13, 1, acts[trial % 3], 3.0);
    const auto theta = init_params(spec, 500 + trial);
    std::vector<double> x(dim);
    for (auto& c : x) c = u(rng);
    std::vector<int> active(dim);
    for (int k = 0; k < dim; ++k) active[k] = k;

    // Input derivatives against central differences.
    const auto jet = forward_jet<double, double>(theta, spec, x, active, 2)[0];
    for (int k = 0; k < dim; ++k) {
      const double h1 = 1e-3, h2 = 1e-2;
      auto at = [&](double d) {
        auto y = x;
        y[k] += d;
        return forward<double, double>(theta, spec, y)[0];
      };
      // Fourth-order stencils keep round-off below small second derivatives.
      const double d1 = (8.0 * (at(h1) - at(-h1)) - (at(2.0 * h1) - at(-2.0 * h1))) / (12.0 * h1);
      const double d2 = (16.0 * (at(h2) + at(-h2)) - (at(2.0 * h2) + at(-2.0 * h2)) - 30.0 * at(0.0)) / (12.0 * h2 * h2);
      w1 = std::max(w1, std::abs(jet.d1[k] - d1) / std::abs(d1));
      w2 = std::max(w2, std::abs(jet.d2[k] - d2) / std::abs(d2));
    }

    // Parameter gradient of a loss built from input jets.
    auto loss = [&](std::span<const ad::Var> th) {
      std::vector<ad::Var> in;
      for (double c : x) in.emplace_back(c);
      const auto j = forward_jet<ad::Var, ad::Var>(th, spec, in, active, 2)[0];
      ad::Var acc = ad::square(j.value);
      for (int k = 0; k < dim; ++k) acc = acc + ad::square(j.d1[k] - 0.3) + j.d2[k] * j.value;
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
    wp = std::max(wp, std::abs(an - fd) / std::max(std::abs(fd), 1e-8));
  }
  o.require(w1 < 1e-6, fmt("input d1 %.1e", w1));
  o.require(w2 < 1e-4, fmt("input d2 %.1e", w2));
  o.require(wp < 1e-5, fmt("parameter gradient %.1e", wp));
  return o;
}

}  // namespace

int main() {
  criterion(1, 1.0, pitfall);
  criterion(2, 1.0, annihilation);
  criterion(3, 30.0, stability);
  criterion(4, 10.0, hfunctions);
  criterion(5, 900.0, trained_toy);
  criterion(6, 60.0, fdm_references);
  criterion(7, 900.0, halfspace);
  criterion(8, 60.0, nonlinear);
  criterion(9, 30.0, differentiation);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
