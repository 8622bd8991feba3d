#pragma once

#include <span>
#include <string>
#include <vector>

namespace rtpinn {

enum class RuleKind { kGaussLegendre, kUniform, kTrapezoid };

std::string to_string(RuleKind kind);

// Nodes and positive weights on [lo, hi].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  double lo = 0.0;
  double hi = 1.0;
  RuleKind kind = RuleKind::kGaussLegendre;

  std::size_t size() const { return nodes.size(); }
  double measure() const { return hi - lo; }

  // Sum of w_j f(x_j).
  double integrate(std::span<const double> samples) const;
  template <class F>
  double integrate_fn(F&& f) const {
    double s = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j) s += weights[j] * f(nodes[j]);
    return s;
  }
};

// Newton iteration on the Legendre recurrence, mapped affinely to [lo, hi].
QuadratureRule gauss_legendre(int n, double lo, double hi);

// Equispaced nodes. Open: left endpoints lo + i*h with weight h (h = (hi-lo)/n).
// Closed: n nodes including both ends, trapezoid weights.
QuadratureRule uniform_rule(int n, double lo, double hi, bool closed);

// Concatenation of rules on adjacent intervals (e.g. a refined layer mesh).
QuadratureRule concatenate(const QuadratureRule& a, const QuadratureRule& b);

// <f> = sum w_j f_j / (hi - lo): velocity average normalised by |S^{d-1}|.
double velocity_average(const QuadratureRule& rule, std::span<const double> samples);

// Product grid over 1-3 axes; the last axis varies fastest.
struct TensorGrid {
  std::vector<QuadratureRule> axes;

  std::size_t size() const;
  std::vector<std::size_t> shape() const;
  std::size_t flat_index(std::span<const std::size_t> multi) const;
  double weight(std::span<const std::size_t> multi) const;
  double integrate(std::span<const double> samples) const;
};

}  // namespace rtpinn
