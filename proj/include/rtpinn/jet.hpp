#pragma once

#include <array>
#include <cmath>
#include <span>

#include "rtpinn/autodiff.hpp"

namespace rtpinn {

inline constexpr int kMaxJetCoords = 3;

// Scalar helpers shared by double and ad::Var so that jet coefficients stay
// differentiable when T is a taped variable.
inline double softplus(double a) { return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a)); }
inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}
inline ad::Var softplus(const ad::Var& a) { return ad::make_unary(a, softplus(a.value()), sigmoid(a.value())); }
inline ad::Var sigmoid(const ad::Var& a) {
  const double s = sigmoid(a.value());
  return ad::make_unary(a, s, s * (1.0 - s));
}

inline double value_of(double x) { return x; }
inline double value_of(const ad::Var& x) { return x.value(); }

// Value plus first and diagonal second partials w.r.t. up to kMaxJetCoords
// designated input coordinates.
template <class T>
struct Jet2 {
  T value{};
  std::array<T, kMaxJetCoords> d1{};
  std::array<T, kMaxJetCoords> d2{};
  int n = 0;

  static Jet2 constant(const T& v, int n_coords) {
    Jet2 j;
    j.value = v;
    j.n = n_coords;
    for (int k = 0; k < n_coords; ++k) j.d1[k] = T(0.0), j.d2[k] = T(0.0);
    return j;
  }
  // Seeded coordinate: d/d(coord) = 1.
  static Jet2 variable(const T& v, int coord, int n_coords) {
    Jet2 j = constant(v, n_coords);
    if (coord >= 0) j.d1[coord] = T(1.0);
    return j;
  }
};

// f(u) given f, f', f'' evaluated at u.value.
template <class T>
Jet2<T> chain(const Jet2<T>& u, const T& f, const T& f1, const T& f2) {
  Jet2<T> r;
  r.n = u.n;
  r.value = f;
  for (int k = 0; k < u.n; ++k) {
    r.d1[k] = f1 * u.d1[k];
    r.d2[k] = f2 * u.d1[k] * u.d1[k] + f1 * u.d2[k];
  }
  return r;
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b) {
  Jet2<T> r;
  r.n = a.n;
  r.value = a.value + b.value;
  for (int k = 0; k < a.n; ++k) r.d1[k] = a.d1[k] + b.d1[k], r.d2[k] = a.d2[k] + b.d2[k];
  return r;
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b) {
  Jet2<T> r;
  r.n = a.n;
  r.value = a.value - b.value;
  for (int k = 0; k < a.n; ++k) r.d1[k] = a.d1[k] - b.d1[k], r.d2[k] = a.d2[k] - b.d2[k];
  return r;
}

template <class T>
Jet2<T> operator-(const Jet2<T>& a) {
  Jet2<T> r;
  r.n = a.n;
  r.value = -a.value;
  for (int k = 0; k < a.n; ++k) r.d1[k] = -a.d1[k], r.d2[k] = -a.d2[k];
  return r;
}

template <class T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b) {
  Jet2<T> r;
  r.n = a.n;
  r.value = a.value * b.value;
  for (int k = 0; k < a.n; ++k) {
    r.d1[k] = a.d1[k] * b.value + a.value * b.d1[k];
    r.d2[k] = a.d2[k] * b.value + 2.0 * (a.d1[k] * b.d1[k]) + a.value * b.d2[k];
  }
  return r;
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, double c) {
  Jet2<T> r = a;
  r.value = a.value + c;
  return r;
}
template <class T>
Jet2<T> operator+(double c, const Jet2<T>& a) { return a + c; }
template <class T>
Jet2<T> operator-(const Jet2<T>& a, double c) { return a + (-c); }
template <class T>
Jet2<T> operator-(double c, const Jet2<T>& a) { return (-a) + c; }

template <class T>
Jet2<T> operator*(const Jet2<T>& a, double c) {
  Jet2<T> r;
  r.n = a.n;
  r.value = a.value * c;
  for (int k = 0; k < a.n; ++k) r.d1[k] = a.d1[k] * c, r.d2[k] = a.d2[k] * c;
  return r;
}
template <class T>
Jet2<T> operator*(double c, const Jet2<T>& a) { return a * c; }

template <class T>
Jet2<T> reciprocal(const Jet2<T>& a) {
  const T inv = 1.0 / a.value;
  const T inv2 = inv * inv;
  return chain(a, inv, -inv2, 2.0 * inv2 * inv);
}

template <class T>
Jet2<T> operator/(const Jet2<T>& a, const Jet2<T>& b) { return a * reciprocal(b); }
template <class T>
Jet2<T> operator/(const Jet2<T>& a, double c) { return a * (1.0 / c); }
template <class T>
Jet2<T> operator/(double c, const Jet2<T>& a) { return reciprocal(a) * c; }

template <class T>
Jet2<T> tanh(const Jet2<T>& u) {
  using std::tanh;
  const T t = tanh(u.value);
  const T s1 = 1.0 - t * t;
  return chain(u, t, s1, -2.0 * t * s1);
}

template <class T>
Jet2<T> exp(const Jet2<T>& u) {
  using std::exp;
  const T e = exp(u.value);
  return chain(u, e, e, e);
}

template <class T>
Jet2<T> log(const Jet2<T>& u) {
  using std::log;
  const T inv = 1.0 / u.value;
  return chain(u, log(u.value), inv, -inv * inv);
}

template <class T>
Jet2<T> sin(const Jet2<T>& u) {
  using std::sin;
  using std::cos;
  const T s = sin(u.value);
  return chain(u, s, cos(u.value), -s);
}

template <class T>
Jet2<T> cos(const Jet2<T>& u) {
  using std::sin;
  using std::cos;
  const T c = cos(u.value);
  return chain(u, c, -sin(u.value), -c);
}

template <class T>
Jet2<T> pow(const Jet2<T>& u, int n) {
  using std::pow;
  if (n < 0) throw std::invalid_argument("jet pow: negative exponent");
  if (n == 0) return Jet2<T>::constant(T(1.0), u.n);
  if (n == 1) return u;
  const T pm2 = pow(u.value, n - 2);
  const T pm1 = pm2 * u.value;
  return chain(u, pm1 * u.value, double(n) * pm1, double(n) * double(n - 1) * pm2);
}

template <class T>
Jet2<T> softplus(const Jet2<T>& u) {
  const T s = sigmoid(u.value);
  return chain(u, softplus(u.value), s, s * (1.0 - s));
}

// C / (1 + exp(-u)).
template <class T>
Jet2<T> scaled_sigmoid(const Jet2<T>& u, double c) {
  const T s = sigmoid(u.value);
  const T ds = s * (1.0 - s);
  return chain(u, c * s, c * ds, c * ds * (1.0 - 2.0 * s));
}

// Jet of a function of one input jet given its value and first two
// derivatives at u.value (implicitly defined functions, tabulated fits).
inline Jet2<double> compose(const Jet2<double>& u, double f, double f1, double f2) {
  return chain(u, f, f1, f2);
}

}  // namespace rtpinn
