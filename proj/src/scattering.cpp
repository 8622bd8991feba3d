#include "rtpinn/scattering.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rtpinn {

void KernelSpec::validate() const {
  if (kind == KernelKind::kHenyeyGreenstein && !(h > 0.0 && h < 1.0))
    throw std::invalid_argument("Henyey-Greenstein anisotropy h must lie in (0, 1)");
}

std::string to_string(KernelKind k) {
  return k == KernelKind::kIsotropic ? "isotropic" : "henyey-greenstein";
}

KernelKind parse_kernel_kind(const std::string& name) {
  if (name == "isotropic") return KernelKind::kIsotropic;
  if (name == "henyey-greenstein" || name == "hg") return KernelKind::kHenyeyGreenstein;
  throw std::invalid_argument("unknown kernel '" + name + "'");
}

double hg_kernel(double h, double cos_angle) { return (1.0 - h * h) / (1.0 + h * h - 2.0 * h * cos_angle); }

ScatteringOperator::ScatteringOperator(const KernelSpec& kernel, const QuadratureRule& rule)
    : kernel_(kernel), rule_(rule) {
  kernel_.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(rule.size());
  Eigen::VectorXd w(n);
  for (Eigen::Index j = 0; j < n; ++j) w[j] = rule.weights[j] / rule.measure();

  Eigen::MatrixXd k(n, n);
  if (isotropic()) {
    k.setOnes();
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) k(i, j) = hg_kernel(kernel_.h, std::cos(rule.nodes[i] - rule.nodes[j]));
    // d_i <- sqrt(d_i / sum_j K_ij d_j w_j) converges to D with D K D W 1 = 1.
    Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
    for (int it = 0; it < 1000; ++it) {
      const Eigen::VectorXd row = k * d.cwiseProduct(w);
      const Eigen::VectorXd next = (d.array() / row.array()).sqrt().matrix();
      const double change = (next - d).cwiseAbs().maxCoeff();
      d = next;
      if (change < 1e-15) break;
    }
    k = d.asDiagonal() * k * d.asDiagonal();
    spread_ = d.maxCoeff() / d.minCoeff();
  }
  a_ = k * w.asDiagonal();
  a_.diagonal().array() -= a_.rowwise().sum().array();
}

std::vector<double> ScatteringOperator::apply(std::span<const double> f) const {
  if (f.size() != static_cast<std::size_t>(a_.rows()))
    throw std::invalid_argument("apply_L: sample count does not match rule");
  const Eigen::Map<const Eigen::VectorXd> fv(f.data(), a_.rows());
  const Eigen::VectorXd out = a_ * fv;
  return {out.data(), out.data() + out.size()};
}

std::vector<double> apply_L(const KernelSpec& kernel, const QuadratureRule& rule, std::span<const double> samples) {
  if (samples.size() != rule.size()) throw std::invalid_argument("apply_L: sample count does not match rule");
  if (kernel.kind == KernelKind::kIsotropic) {
    kernel.validate();
    const double avg = velocity_average(rule, samples);
    std::vector<double> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) out[i] = avg - samples[i];
    return out;
  }
  return ScatteringOperator(kernel, rule).apply(samples);
}

double average_of_L(const KernelSpec& kernel, const QuadratureRule& rule, std::span<const double> samples) {
  const auto lf = apply_L(kernel, rule, samples);
  return velocity_average(rule, lf);
}

}  // namespace rtpinn
