#pragma once

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtpinn/mlp.hpp"

namespace rtpinn {

// Returns the loss at theta. When grad is non-empty it receives the gradient.
using LossGradFn = std::function<double(std::span<const double> theta, std::span<double> grad)>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay_factor = 1.0;  // lr *= decay_factor every decay_every steps
  int decay_every = 0;        // 0 disables decay
  void validate() const;
};

struct LbfgsConfig {
  int memory = 10;
  double c1 = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 30;
  double fallback_lr = 1e-4;
  // Scale the initial inverse Hessian by s'y/y'y of the newest pair.
  bool scale_initial = true;
  void validate() const;
};

struct StopRule {
  int max_iter_adam = 12000;
  double adam_loss_tol = 0.005;
  int max_iter_lbfgs = 10000;
  double lbfgs_grad_tol = 1e-6;
  void validate() const;
};

struct HistoryEntry {
  int iteration = 0;
  std::string phase;
  double loss = 0.0;
  double rel_error = std::numeric_limits<double>::quiet_NaN();
};

struct LineSearchRecord {
  double f0 = 0.0;
  double f1 = 0.0;
  double step = 0.0;
  double slope = 0.0;  // directional derivative g'd at the start point
  bool fallback = false;
};

enum class OptStatus { kConverged, kMaxIterations, kLineSearchFailed };
std::string to_string(OptStatus s);

struct OptResult {
  ParamVector theta;
  std::vector<HistoryEntry> history;
  std::vector<LineSearchRecord> line_searches;
  OptStatus status = OptStatus::kMaxIterations;
  int iterations = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

// Raised when the loss or its gradient stops being finite.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int iteration)
      : std::runtime_error(what + " at iteration " + std::to_string(iteration)), iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

struct TrainHooks {
  std::function<double(std::span<const double>)> error;  // relative error monitor
  int error_every = 100;
  std::function<void(const HistoryEntry&)> on_step;
};

OptResult adam_run(const LossGradFn& f, ParamVector theta0, const AdamConfig& cfg, int max_iter, double loss_tol,
                   const TrainHooks& hooks = {});

OptResult lbfgs_run(const LossGradFn& f, ParamVector theta0, const LbfgsConfig& cfg, int max_iter,
                    double grad_tol, const TrainHooks& hooks = {});

// Adam until the loss drops below the first threshold, then L-BFGS from the
// Adam iterate until the gradient norm drops below the second.
OptResult two_phase_train(const LossGradFn& f, ParamVector theta0, const AdamConfig& adam, const LbfgsConfig& lbfgs,
                          const StopRule& stop, const TrainHooks& hooks = {});

}  // namespace rtpinn
