#include "rtpinn/autodiff.hpp"

namespace rtpinn::ad {

Tape::Tape() { start_.push_back(0); }

int Tape::leaf() {
  start_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<int>(size() - 1);
}

int Tape::node(std::span<const int> parents, std::span<const double> partials) {
  if (parents.size() != partials.size())
    throw std::logic_error("tape: parent/partial count mismatch");
  parent_.insert(parent_.end(), parents.begin(), parents.end());
  partial_.insert(partial_.end(), partials.begin(), partials.end());
  start_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<int>(size() - 1);
}

int Tape::unary(int a, double da) {
  parent_.push_back(a);
  partial_.push_back(da);
  start_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<int>(size() - 1);
}

int Tape::binary(int a, double da, int b, double db) {
  parent_.push_back(a);
  partial_.push_back(da);
  parent_.push_back(b);
  partial_.push_back(db);
  start_.push_back(static_cast<std::uint32_t>(parent_.size()));
  return static_cast<int>(size() - 1);
}

void Tape::clear() {
  start_.assign(1, 0);
  parent_.clear();
  partial_.clear();
}

std::vector<double> Tape::adjoints(int root) const {
  if (root < 0 || static_cast<std::size_t>(root) >= size())
    throw std::logic_error("tape: root is not recorded on this tape");
  std::vector<double> adj(size(), 0.0);
  adj[root] = 1.0;
  for (int i = root; i >= 0; --i) {
    const double a = adj[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = start_[i]; e < start_[i + 1]; ++e) adj[parent_[e]] += a * partial_[e];
  }
  return adj;
}

Tape* common_tape(const Var& a, const Var& b) {
  if (a.is_constant()) return b.tape();
  if (b.is_constant() || a.tape() == b.tape()) return a.tape();
  throw std::logic_error("tape: operands recorded on different tapes");
}

Var make_unary(const Var& a, double value, double da) {
  if (a.is_constant()) return Var(value);
  return Var(a.tape(), a.tape()->unary(a.index(), da), value);
}

Var make_binary(const Var& a, const Var& b, double value, double da, double db) {
  Tape* t = common_tape(a, b);
  if (t == nullptr) return Var(value);
  if (a.is_constant()) return Var(t, t->unary(b.index(), db), value);
  if (b.is_constant()) return Var(t, t->unary(a.index(), da), value);
  return Var(t, t->binary(a.index(), da, b.index(), db), value);
}

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }
Var& Var::operator/=(const Var& o) { return *this = *this / o; }

Var dot(std::span<const double> coefficients, std::span<const Var> terms) {
  if (coefficients.size() != terms.size()) throw std::invalid_argument("ad::dot: size mismatch");
  Tape* tape = nullptr;
  double value = 0.0;
  std::vector<int> parents;
  std::vector<double> partials;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    value += coefficients[k] * terms[k].value();
    if (terms[k].is_constant()) continue;
    if (tape == nullptr) tape = terms[k].tape();
    else if (tape != terms[k].tape()) throw std::logic_error("tape: operands recorded on different tapes");
    parents.push_back(terms[k].index());
    partials.push_back(coefficients[k]);
  }
  if (tape == nullptr) return Var(value);
  return Var(tape, tape->node(parents, partials), value);
}

Var sum(std::span<const Var> terms) {
  std::vector<double> ones(terms.size(), 1.0);
  return dot(ones, terms);
}

ValueAndGradient grad_params(const TapedLoss& loss, std::span<const double> theta) {
  Tape tape;
  std::vector<Var> params;
  params.reserve(theta.size());
  for (double t : theta) params.emplace_back(&tape, tape.leaf(), t);
  const Var out = loss(params);
  ValueAndGradient result;
  result.value = out.value();
  result.gradient.assign(theta.size(), 0.0);
  if (out.is_constant()) return result;
  if (out.tape() != &tape) throw std::logic_error("grad_params: loss was recorded on a foreign tape");
  const auto adj = tape.adjoints(out.index());
  for (std::size_t k = 0; k < params.size(); ++k) result.gradient[k] = adj[params[k].index()];
  return result;
}

}  // namespace rtpinn::ad
