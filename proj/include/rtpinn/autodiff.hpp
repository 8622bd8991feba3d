#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

// Scalar reverse-mode tape. Nodes carry an arbitrary number of parents so that
// sums and weighted averages over quadrature nodes cost one node each.
namespace rtpinn::ad {

class Tape {
 public:
  Tape();

  int leaf();
  // Adds a node whose partial w.r.t. parents[k] is partials[k].
  int node(std::span<const int> parents, std::span<const double> partials);
  int unary(int a, double da);
  int binary(int a, double da, int b, double db);

  std::size_t size() const { return start_.size() - 1; }
  void clear();

  // Adjoints of every node w.r.t. `root` (seeded with 1).
  std::vector<double> adjoints(int root) const;

 private:
  std::vector<std::uint32_t> start_;
  std::vector<int> parent_;
  std::vector<double> partial_;
};

// A real number that may be recorded on a Tape. Constants carry no tape.
class Var {
 public:
  Var() = default;
  Var(double c) : value_(c) {}  // NOLINT: implicit promotion of constants
  Var(Tape* tape, int index, double value) : tape_(tape), index_(index), value_(value) {}

  double value() const { return value_; }
  int index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool is_constant() const { return tape_ == nullptr; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);

 private:
  Tape* tape_ = nullptr;
  int index_ = -1;
  double value_ = 0.0;
};

// Tape shared by two operands; throws std::logic_error on a mismatch.
Tape* common_tape(const Var& a, const Var& b);

Var make_unary(const Var& a, double value, double da);
Var make_binary(const Var& a, const Var& b, double value, double da, double db);

inline Var operator+(const Var& a, const Var& b) {
  return make_binary(a, b, a.value() + b.value(), 1.0, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  return make_binary(a, b, a.value() - b.value(), 1.0, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return make_binary(a, b, a.value() * b.value(), b.value(), a.value());
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.value();
  return make_binary(a, b, a.value() * inv, inv, -a.value() * inv * inv);
}
inline Var operator-(const Var& a) { return make_unary(a, -a.value(), -1.0); }

inline Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return make_unary(a, t, 1.0 - t * t);
}
inline Var exp(const Var& a) {
  const double e = std::exp(a.value());
  return make_unary(a, e, e);
}
inline Var log(const Var& a) { return make_unary(a, std::log(a.value()), 1.0 / a.value()); }
inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value());
  return make_unary(a, s, 0.5 / s);
}
inline Var sin(const Var& a) { return make_unary(a, std::sin(a.value()), std::cos(a.value())); }
inline Var cos(const Var& a) { return make_unary(a, std::cos(a.value()), -std::sin(a.value())); }
inline Var square(const Var& a) { return make_unary(a, a.value() * a.value(), 2.0 * a.value()); }
inline Var pow(const Var& a, int n) {
  const double p = std::pow(a.value(), n);
  return make_unary(a, p, n * std::pow(a.value(), n - 1));
}

// Sum of terms and weighted sum sum_k c_k x_k as single tape nodes.
Var sum(std::span<const Var> terms);
Var dot(std::span<const double> coefficients, std::span<const Var> terms);

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

// Records `loss` on a fresh tape with leaves for theta and returns the exact
// reverse-mode gradient.
using TapedLoss = std::function<Var(std::span<const Var> params)>;
ValueAndGradient grad_params(const TapedLoss& loss, std::span<const double> theta);

}  // namespace rtpinn::ad
