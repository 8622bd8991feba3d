#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "rtpinn/losses.hpp"
#include "rtpinn/problem.hpp"

namespace testsupport {

// Adaptive Simpson quadrature, used as an independent oracle.
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-14, int depth = 0) {
  const auto s = [&](double lo, double hi) {
    const double m = 0.5 * (lo + hi);
    return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(m) + f(hi));
  };
  const double m = 0.5 * (a + b);
  const double whole = s(a, b), left = s(a, m), right = s(m, b);
  if (depth > 40 || std::abs(left + right - whole) < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
  return simpson(f, a, m, tol / 2.0, depth + 1) + simpson(f, m, b, tol / 2.0, depth + 1);
}

// Toy problem: eps v f_x = <f> - f - eps v, f(0, v > 0) = 1, f(1, v < 0) = 0.
// Exact solution 1 - x.
inline rtpinn::ProblemSpec toy_problem(double eps) {
  rtpinn::ProblemSpec sp;
  sp.epsilon = eps;
  sp.source = [eps](double, double, double v) { return -v / eps; };
  sp.inflow = [](rtpinn::Face f, double, double, double) { return f == rtpinn::Face::kLeft ? 1.0 : 0.0; };
  return sp;
}

inline rtpinn::TrainingConfig toy_training(int nx = 80, int nv = 60, int nb = 60) {
  rtpinn::TrainingConfig tc;
  tc.nx = nx;
  tc.nv = nv;
  tc.nb = nb;
  return tc;
}

// Jet map helpers for closed-form candidates.
using J = rtpinn::Jet2<double>;
inline std::shared_ptr<rtpinn::Approximant> function(int dim, std::function<J(std::span<const J>)> fn) {
  return std::make_shared<rtpinn::FunctionApproximant>(dim, std::move(fn));
}

// Relative error of the analytic directional derivative against a central
// difference along a fixed pseudo-random direction.
struct DirectionalCheck {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel() const { return std::abs(analytic - numeric) / std::max(std::abs(numeric), 1e-300); }
};

inline DirectionalCheck directional_check(const rtpinn::LossGradFn& f, const std::vector<double>& theta,
                                          std::uint64_t seed, double h = 1e-5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<double> d(theta.size()), g(theta.size());
  for (auto& x : d) x = n01(rng);
  f(theta, g);
  DirectionalCheck c;
  for (std::size_t i = 0; i < d.size(); ++i) c.analytic += g[i] * d[i];
  auto tp = theta, tm = theta;
  for (std::size_t i = 0; i < d.size(); ++i) tp[i] += h * d[i], tm[i] -= h * d[i];
  c.numeric = (f(tp, {}) - f(tm, {})) / (2.0 * h);
  return c;
}

}  // namespace testsupport
