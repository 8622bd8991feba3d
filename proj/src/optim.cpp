#include "rtpinn/optim.hpp"

#include <cmath>
#include <deque>
#include <numeric>

namespace rtpinn {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

bool all_finite(std::span<const double> a) {
  for (double x : a)
    if (!std::isfinite(x)) return false;
  return true;
}

void record(OptResult& r, const TrainHooks& hooks, int k, const char* phase, double loss,
            std::span<const double> theta) {
  HistoryEntry e;
  e.iteration = k;
  e.phase = phase;
  e.loss = loss;
  if (hooks.error && hooks.error_every > 0 && k % hooks.error_every == 0) e.rel_error = hooks.error(theta);
  r.history.push_back(e);
  if (hooks.on_step) hooks.on_step(e);
}

}  // namespace

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("adam: lr must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    throw std::invalid_argument("adam: betas must lie in (0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adam: eps must be positive");
  if (!(decay_factor > 0.0) || decay_every < 0) throw std::invalid_argument("adam: invalid lr decay");
}

void LbfgsConfig::validate() const {
  if (memory < 1) throw std::invalid_argument("lbfgs: memory must be >= 1");
  if (!(c1 > 0.0 && c1 < 1.0)) throw std::invalid_argument("lbfgs: c1 must lie in (0, 1)");
  if (!(shrink > 0.0 && shrink < 1.0)) throw std::invalid_argument("lbfgs: shrink must lie in (0, 1)");
  if (max_backtracks < 1 || !(fallback_lr > 0.0)) throw std::invalid_argument("lbfgs: invalid line search");
}

void StopRule::validate() const {
  if (max_iter_adam < 0 || max_iter_lbfgs < 0) throw std::invalid_argument("stop rule: negative iteration cap");
  if (!(adam_loss_tol > 0.0) || !(lbfgs_grad_tol > 0.0))
    throw std::invalid_argument("stop rule: thresholds must be positive");
}

std::string to_string(OptStatus s) {
  switch (s) {
    case OptStatus::kConverged: return "converged";
    case OptStatus::kMaxIterations: return "max-iterations";
    case OptStatus::kLineSearchFailed: return "line-search-failed";
  }
  return "unknown";
}

OptResult adam_run(const LossGradFn& f, ParamVector theta0, const AdamConfig& cfg, int max_iter, double loss_tol,
                   const TrainHooks& hooks) {
  cfg.validate();
  OptResult r;
  r.theta = std::move(theta0);
  r.loss = std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = r.theta.size();
  std::vector<double> g(n), m(n, 0.0), v(n, 0.0);
  double b1t = 1.0, b2t = 1.0;
  int k = 0;
  for (; k < max_iter; ++k) {
    const double loss = f(r.theta, g);
    if (!std::isfinite(loss) || !all_finite(g)) throw NumericalError("adam: non-finite loss or gradient", k);
    r.loss = loss;
    r.grad_norm = norm(g);
    record(r, hooks, k, "adam", loss, r.theta);
    if (loss < loss_tol) {
      r.status = OptStatus::kConverged;
      break;
    }
    double lr = cfg.lr;
    if (cfg.decay_every > 0) lr *= std::pow(cfg.decay_factor, k / cfg.decay_every);
    b1t *= cfg.beta1;
    b2t *= cfg.beta2;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / (1.0 - b1t);
      const double vh = v[i] / (1.0 - b2t);
      r.theta[i] -= lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
  r.iterations = k;
  return r;
}

OptResult lbfgs_run(const LossGradFn& f, ParamVector theta0, const LbfgsConfig& cfg, int max_iter,
                    double grad_tol, const TrainHooks& hooks) {
  cfg.validate();
  OptResult r;
  r.theta = std::move(theta0);
  const std::size_t n = r.theta.size();
  std::vector<double> g(n), d(n), trial(n), g_trial(n);
  double loss = f(r.theta, g);
  if (!std::isfinite(loss) || !all_finite(g)) throw NumericalError("lbfgs: non-finite loss or gradient", 0);
  r.loss = loss;

  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  std::vector<double> alpha;
  int failures = 0;
  int k = 0;
  for (;; ++k) {
    r.grad_norm = norm(g);
    record(r, hooks, k, "lbfgs", loss, r.theta);
    if (r.grad_norm < grad_tol) {
      r.status = OptStatus::kConverged;
      break;
    }
    if (k >= max_iter) {
      r.status = OptStatus::kMaxIterations;
      break;
    }

    // Two-loop recursion: d = -H g.
    for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
    const std::size_t m = S.size();
    alpha.assign(m, 0.0);
    for (std::size_t j = m; j-- > 0;) {
      alpha[j] = rho[j] * dot(S[j], d);
      for (std::size_t i = 0; i < n; ++i) d[i] -= alpha[j] * Y[j][i];
    }
    if (m > 0 && cfg.scale_initial) {
      const double gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
      for (auto& di : d) di *= gamma;
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double beta = rho[j] * dot(Y[j], d);
      for (std::size_t i = 0; i < n; ++i) d[i] += (alpha[j] - beta) * S[j][i];
    }
    double slope = dot(g, d);
    if (!(slope < 0.0)) {
      S.clear(), Y.clear(), rho.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      slope = -r.grad_norm * r.grad_norm;
    }

    // Backtracking Armijo.
    double t = 1.0;
    double f_trial = 0.0;
    bool accepted = false;
    for (int b = 0; b < cfg.max_backtracks; ++b, t *= cfg.shrink) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = r.theta[i] + t * d[i];
      f_trial = f(trial, {});
      if (std::isfinite(f_trial) && f_trial <= loss + cfg.c1 * t * slope) {
        accepted = true;
        break;
      }
    }
    LineSearchRecord ls{loss, 0.0, t, slope, !accepted};
    if (!accepted) {
      if (++failures >= 2) {
        r.status = OptStatus::kLineSearchFailed;
        break;
      }
      t = cfg.fallback_lr;
      for (std::size_t i = 0; i < n; ++i) trial[i] = r.theta[i] - t * g[i];
      ls.step = t;
      S.clear(), Y.clear(), rho.clear();
    } else {
      failures = 0;
    }
    const double f_new = f(trial, g_trial);
    if (!std::isfinite(f_new) || !all_finite(g_trial))
      throw NumericalError("lbfgs: non-finite loss or gradient", k + 1);
    ls.f1 = f_new;
    r.line_searches.push_back(ls);

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = trial[i] - r.theta[i], y[i] = g_trial[i] - g[i];
    const double sy = dot(s, y);
    if (accepted && sy > 1e-10 * norm(s) * norm(y)) {
      if (static_cast<int>(S.size()) == cfg.memory) S.pop_front(), Y.pop_front(), rho.pop_front();
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
    } else if (accepted) {
      // Non-positive curvature: the stored pairs no longer describe the local
      // scale, so restart from a backtracked steepest-descent step.
      S.clear(), Y.clear(), rho.clear();
    }
    r.theta.swap(trial);
    g.swap(g_trial);
    loss = f_new;
    r.loss = loss;
  }
  r.iterations = k;
  return r;
}

OptResult two_phase_train(const LossGradFn& f, ParamVector theta0, const AdamConfig& adam, const LbfgsConfig& lbfgs,
                          const StopRule& stop, const TrainHooks& hooks) {
  stop.validate();
  OptResult a = adam_run(f, std::move(theta0), adam, stop.max_iter_adam, stop.adam_loss_tol, hooks);
  OptResult b = lbfgs_run(f, std::move(a.theta), lbfgs, stop.max_iter_lbfgs, stop.lbfgs_grad_tol, hooks);
  a.history.insert(a.history.end(), b.history.begin(), b.history.end());
  b.history = std::move(a.history);
  return b;
}

}  // namespace rtpinn
