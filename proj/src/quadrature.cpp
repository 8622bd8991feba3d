#include "rtpinn/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rtpinn {

namespace {

void check_interval(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("quadrature: non-finite interval bound");
  if (!(lo < hi)) throw std::invalid_argument("quadrature: interval requires lo < hi");
}

// P_n(z) and P_n'(z) by the three-term recurrence.
std::pair<double, double> legendre(int n, double z) {
  double p1 = 1.0, p2 = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
  }
  const double dp = n * (z * p1 - p2) / (z * z - 1.0);
  return {p1, dp};
}

}  // namespace

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::kGaussLegendre: return "gauss-legendre";
    case RuleKind::kUniform: return "uniform";
    case RuleKind::kTrapezoid: return "trapezoid";
  }
  return "unknown";
}

double QuadratureRule::integrate(std::span<const double> samples) const {
  if (samples.size() != nodes.size())
    throw std::invalid_argument("quadrature: sample count does not match rule size");
  double s = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) s += weights[j] * samples[j];
  return s;
}

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  check_interval(lo, hi);
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  QuadratureRule rule;
  rule.lo = lo;
  rule.hi = hi;
  rule.kind = RuleKind::kGaussLegendre;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, z);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) <= 1e-15) break;
    }
    const auto [p, dp] = legendre(n, z);
    (void)p;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    // z runs from near +1 downwards; store ascending.
    rule.nodes[i] = mid - half * z;
    rule.nodes[n - 1 - i] = mid + half * z;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = mid;
  return rule;
}

QuadratureRule uniform_rule(int n, double lo, double hi, bool closed) {
  check_interval(lo, hi);
  if (n < 1 || (closed && n < 2))
    throw std::invalid_argument("uniform_rule: too few points");
  QuadratureRule rule;
  rule.lo = lo;
  rule.hi = hi;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  if (closed) {
    rule.kind = RuleKind::kTrapezoid;
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      rule.nodes[i] = (i == n - 1) ? hi : lo + i * h;
      rule.weights[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
    }
  } else {
    rule.kind = RuleKind::kUniform;
    const double h = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
      rule.nodes[i] = lo + i * h;
      rule.weights[i] = h;
    }
  }
  return rule;
}

QuadratureRule concatenate(const QuadratureRule& a, const QuadratureRule& b) {
  if (std::abs(a.hi - b.lo) > 1e-14 * std::max(1.0, std::abs(a.hi)))
    throw std::invalid_argument("concatenate: rules are not adjacent");
  QuadratureRule out;
  out.lo = a.lo;
  out.hi = b.hi;
  out.kind = a.kind == b.kind ? a.kind : RuleKind::kUniform;
  out.nodes = a.nodes;
  out.weights = a.weights;
  out.nodes.insert(out.nodes.end(), b.nodes.begin(), b.nodes.end());
  out.weights.insert(out.weights.end(), b.weights.begin(), b.weights.end());
  return out;
}

double velocity_average(const QuadratureRule& rule, std::span<const double> samples) {
  return rule.integrate(samples) / rule.measure();
}

std::size_t TensorGrid::size() const {
  std::size_t n = axes.empty() ? 0 : 1;
  for (const auto& a : axes) n *= a.size();
  return n;
}

std::vector<std::size_t> TensorGrid::shape() const {
  std::vector<std::size_t> s;
  for (const auto& a : axes) s.push_back(a.size());
  return s;
}

std::size_t TensorGrid::flat_index(std::span<const std::size_t> multi) const {
  if (multi.size() != axes.size()) throw std::invalid_argument("TensorGrid: index rank mismatch");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < axes.size(); ++k) idx = idx * axes[k].size() + multi[k];
  return idx;
}

double TensorGrid::weight(std::span<const std::size_t> multi) const {
  if (multi.size() != axes.size()) throw std::invalid_argument("TensorGrid: index rank mismatch");
  double w = 1.0;
  for (std::size_t k = 0; k < axes.size(); ++k) w *= axes[k].weights.at(multi[k]);
  return w;
}

double TensorGrid::integrate(std::span<const double> samples) const {
  if (samples.size() != size()) throw std::invalid_argument("TensorGrid: sample count mismatch");
  std::vector<std::size_t> multi(axes.size(), 0);
  double s = 0.0;
  for (std::size_t flat = 0; flat < samples.size(); ++flat) {
    s += weight(multi) * samples[flat];
    for (std::size_t k = axes.size(); k-- > 0;) {
      if (++multi[k] < axes[k].size()) break;
      multi[k] = 0;
    }
  }
  return s;
}

}  // namespace rtpinn
