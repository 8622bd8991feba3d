#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtpinn/approximant.hpp"
#include "rtpinn/optim.hpp"
#include "rtpinn/problem.hpp"

namespace rtpinn {

struct LossTerm {
  std::string name;
  double value = 0.0;
};

struct LossBreakdown {
  double total = 0.0;
  std::vector<LossTerm> terms;
  // Value of a named term; throws when absent.
  double term(const std::string& name) const;
  bool has(const std::string& name) const;
};

// Loss terms as tape variables.
struct TapedLoss {
  std::vector<std::pair<std::string, ad::Var>> terms;
  ad::Var total;
  void add(std::string name, ad::Var v) { terms.emplace_back(std::move(name), std::move(v)); }
  void finalize();
  LossBreakdown breakdown() const;
};

TapedLoss vanilla_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& f, LossTape& tape);

TapedLoss macro_micro_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                           const Approximant& g, LossTape& tape, bool mean_penalty);

struct BoundaryLayerOptions {
  bool mean_penalty = true;
  // 2D only: use the unsubtracted micro equation as printed
  // (v.grad(rho + eps g) + sin(a) dGamma/dy - L g + eps sigma_a (rho + eps g + Gamma) - eps G).
  bool printed_micro = false;
};

// gamma: frozen corrector over (x, v) in 1D or (x, y, alpha) in 2D; its
// partial in y (input coordinate 1) is requested in 2D.
TapedLoss bl_corrected_loss_1d(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                               const Approximant& g, const Approximant& gamma, LossTape& tape,
                               const BoundaryLayerOptions& opt = {});
TapedLoss bl_corrected_loss_2d(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                               const Approximant& g, const Approximant& gamma, LossTape& tape,
                               const BoundaryLayerOptions& opt = {});

// f = rho + eps(x) g with eps(x) from spec.epsilon_x.
TapedLoss hetero_eps_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                          const Approximant& g, LossTape& tape);

struct NonlinearConstants {
  double a = 1.0;
  double c = 1.0;
  double sigma = 1.0;
  double t_left = 1.0;   // T(x0)
  double t_right = 0.0;  // T(x1)
  double kappa() const { return a * c / (3.0 * sigma); }
};

// Coupled radiative loss. Intensity inflow data comes from spec.inflow.
TapedLoss nonlinear_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                         const Approximant& g, const Approximant& temperature, const NonlinearConstants& k,
                         LossTape& tape);

// Binds a loss builder to a parameter layout for the optimizers.
class LossModel {
 public:
  using Builder = std::function<TapedLoss(LossTape&, std::span<const double> theta)>;
  LossModel(ParamLayout layout, Builder build) : layout_(std::move(layout)), build_(std::move(build)) {}

  const ParamLayout& layout() const { return layout_; }
  LossGradFn loss_grad() const;
  LossBreakdown breakdown(std::span<const double> theta) const;
  double value(std::span<const double> theta) const { return breakdown(theta).total; }

 private:
  ParamLayout layout_;
  Builder build_;
};

}  // namespace rtpinn
