#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtpinn/quadrature.hpp"

namespace rtpinn {

enum class KernelKind { kIsotropic, kHenyeyGreenstein };

struct KernelSpec {
  KernelKind kind = KernelKind::kIsotropic;
  double h = 0.0;  // anisotropy, HG only
  void validate() const;
};

std::string to_string(KernelKind k);
KernelKind parse_kernel_kind(const std::string& name);

// HG phase function normalized so that its angular average is 1.
double hg_kernel(double h, double cos_angle);

// Discrete scattering operator (L f)_i = (1/|S|) sum_j K_ij w_j (f_j - f_i)
// on the nodes of a velocity or angle rule. The HG matrix is symmetrically
// rescaled so that each discrete row average is exactly one.
class ScatteringOperator {
 public:
  ScatteringOperator(const KernelSpec& kernel, const QuadratureRule& rule);

  std::vector<double> apply(std::span<const double> f) const;
  const KernelSpec& kernel() const { return kernel_; }
  bool isotropic() const { return kernel_.kind == KernelKind::kIsotropic; }
  // Dense matrix A with (L f) = A f.
  const Eigen::MatrixXd& matrix() const { return a_; }
  // max/min of the symmetric rescaling factors (1 means none was needed).
  double normalization_spread() const { return spread_; }

 private:
  KernelSpec kernel_;
  QuadratureRule rule_;
  Eigen::MatrixXd a_;
  double spread_ = 1.0;
};

std::vector<double> apply_L(const KernelSpec& kernel, const QuadratureRule& rule, std::span<const double> samples);
double average_of_L(const KernelSpec& kernel, const QuadratureRule& rule, std::span<const double> samples);

}  // namespace rtpinn
