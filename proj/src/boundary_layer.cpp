#include "rtpinn/boundary_layer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace rtpinn {
namespace {

constexpr double kPi = std::numbers::pi;

// Kernel scale c in 1/H(mu) = sum_j W_j H_j mu_j / (c (mu + mu_j)), where W
// already covers both branches in 2D.
double kernel_scale(int dim) { return dim == 1 ? 2.0 : 1.0; }
double branch_count(int dim) { return dim == 1 ? 1.0 : 2.0; }

HFunctionTable h_table_skeleton(int dim, int n) {
  if (n < 2) throw std::invalid_argument("H-function: need at least two nodes");
  HFunctionTable h;
  h.dim = dim;
  const QuadratureRule r = dim == 1 ? gauss_legendre(n, 0.0, 1.0) : gauss_legendre(n, 0.0, 0.5 * kPi);
  h.nodes = r.nodes;
  h.weights = r.weights;
  for (double a : r.nodes) h.mu.push_back(dim == 1 ? a : std::cos(a));
  h.values.assign(n, 1.0);
  return h;
}

// Damped fixed point H <- (1 - lambda) H + lambda / I[H].
HFunctionTable solve_h(int dim, int n, double tol, int max_iter) {
  if (!(tol > 0.0)) throw std::invalid_argument("H-function: tolerance must be positive");
  HFunctionTable h = h_table_skeleton(dim, n);
  constexpr double lambda = 0.5;
  std::vector<double> next(h.size());
  double change = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    change = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      next[i] = (1.0 - lambda) * h.values[i] + lambda / h.integral(h.mu[i]);
      change = std::max(change, std::abs(next[i] - h.values[i]));
    }
    h.values.swap(next);
    h.iterations = it;
    if (change < tol) break;
  }
  if (!(change < tol))
    throw std::runtime_error("H-function iteration did not converge (last change " + std::to_string(change) + ")");
  h.residual = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i)
    h.residual = std::max(h.residual, std::abs(1.0 / h.values[i] - h.integral(h.mu[i])));
  return h;
}

}  // namespace

double HFunctionTable::integral(double m) const {
  const double scale = branch_count(dim) / kernel_scale(dim);
  double s = 0.0;
  for (std::size_t j = 0; j < size(); ++j) s += weights[j] * values[j] * mu[j] / (m + mu[j]);
  return scale * s;
}

double HFunctionTable::operator()(double m) const {
  if (m < 0.0 || m > 1.0 + 1e-12) throw std::domain_error("H-function: argument outside [0, 1]");
  return 1.0 / integral(m);
}

HFunctionTable chandrasekhar_h_1d(int n, double tol, int max_iter) { return solve_h(1, n, tol, max_iter); }
HFunctionTable chandrasekhar_h_2d(int n, double tol, int max_iter) { return solve_h(2, n, tol, max_iter); }

double f_bl_infinity_1d(const std::function<double(double)>& phi, const HFunctionTable& h) {
  if (h.dim != 1) throw std::invalid_argument("f_bl_infinity_1d: 2D table");
  double s = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) s += h.weights[j] * phi(h.nodes[j]) * h.values[j] * h.mu[j];
  return 0.5 * std::sqrt(3.0) * s;
}

double f_bl_infinity_2d(const std::function<double(double)>& phi, const HFunctionTable& h) {
  if (h.dim != 2) throw std::invalid_argument("f_bl_infinity_2d: 1D table");
  double s = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double a = h.nodes[j];
    s += h.weights[j] * (phi(a) + phi(2.0 * kPi - a)) * h.mu[j] * h.values[j];
  }
  return s / std::sqrt(kPi);
}

double reflection_bc_1d(const std::function<double(double)>& phi, const HFunctionTable& h, double v) {
  if (h.dim != 1) throw std::invalid_argument("reflection_bc_1d: 2D table");
  if (!(v < 0.0 && v >= -1.0)) throw std::domain_error("reflection_bc_1d: v must lie in [-1, 0)");
  const double m = -v;
  double s = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j)
    s += h.weights[j] * phi(h.nodes[j]) * h.values[j] * h.mu[j] / (h.mu[j] + m);
  return 0.5 * h(m) * s;
}

double reflection_bc_2d(const std::function<double(double)>& phi, const HFunctionTable& h, double alpha) {
  if (h.dim != 2) throw std::invalid_argument("reflection_bc_2d: 1D table");
  const double c = std::cos(alpha);
  if (!(c <= 0.0)) throw std::domain_error("reflection_bc_2d: alpha must be outgoing (cos alpha <= 0)");
  const double m = -c;
  double s = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double a = h.nodes[j];
    s += h.weights[j] * (phi(a) + phi(2.0 * kPi - a)) * h.mu[j] * h.values[j] / (h.mu[j] + m);
  }
  return h(m) * s;
}

void write_hfunction_csv(std::ostream& os, const HFunctionTable& h) {
  os << "# rtpinn-hfunction dim " << h.dim << " n " << h.size() << " residual " << std::setprecision(6)
     << h.residual << '\n';
  os << "node,H\n" << std::setprecision(17);
  for (std::size_t j = 0; j < h.size(); ++j) os << h.nodes[j] << ',' << h.values[j] << '\n';
}

HFunctionTable read_hfunction_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("H-function CSV: empty input");
  std::istringstream hs(line);
  std::string hash, tag, k1, k2, k3;
  int dim = 0, n = 0;
  double residual = 0.0;
  if (!(hs >> hash >> tag >> k1 >> dim >> k2 >> n >> k3 >> residual) || tag != "rtpinn-hfunction")
    throw std::runtime_error("H-function CSV: bad header");
  if (dim != 1 && dim != 2) throw std::runtime_error("H-function CSV: bad dimension");
  HFunctionTable h = h_table_skeleton(dim, n);
  h.residual = residual;
  std::getline(is, line);
  for (int j = 0; j < n; ++j) {
    if (!std::getline(is, line)) throw std::runtime_error("H-function CSV: truncated");
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("H-function CSV: malformed row");
    const double node = std::stod(line.substr(0, comma));
    if (std::abs(node - h.nodes[j]) > 1e-12) throw std::runtime_error("H-function CSV: node mismatch");
    h.values[j] = std::stod(line.substr(comma + 1));
  }
  return h;
}

// ---------------------------------------------------------------------------
// Half-space solves.

void HalfSpaceSpec::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("half-space: dim must be 1 or 2");
  if (!(Z > 0.0)) throw std::invalid_argument("half-space: Z must be positive");
  if (nz < 2 || nv < 2 || nb < 1) throw std::invalid_argument("half-space: counts must be positive");
  if (!inflow) throw std::invalid_argument("half-space: missing inflow data");
  if (!(flux_weight > 0.0) || !(boundary_weight > 0.0))
    throw std::invalid_argument("half-space: weights must be positive");
}

double HalfSpaceSpec::inflow_sup() const {
  // Endpoints included: the cone is closed for this purpose.
  constexpr int n = 2001;
  double m = 0.0;
  auto scan = [&](double lo, double hi) {
    for (int i = 0; i < n; ++i) m = std::max(m, std::abs(inflow(lo + (hi - lo) * i / (n - 1))));
  };
  if (dim == 1) {
    scan(0.0, 1.0);
  } else {
    scan(0.0, 0.5 * kPi);
    scan(1.5 * kPi, 2.0 * kPi);
  }
  return m;
}

HalfSpaceSet make_halfspace_set(const HalfSpaceSpec& spec, std::uint64_t seed) {
  spec.validate();
  HalfSpaceSet s;
  s.dim = spec.dim;
  s.z_rule = uniform_rule(spec.nz, 0.0, spec.Z, false);
  s.v_rule = velocity_rule(spec.dim, spec.nv);
  for (std::size_t j = 0; j < s.v_rule.size(); ++j) {
    const double v = s.v_rule.nodes[j];
    s.dir.push_back(spec.dim == 1 ? v : std::cos(v));
    s.vel_avg_w.push_back(s.v_rule.weights[j] / s.v_rule.measure());
  }
  const std::size_t nz = s.z_rule.size(), nv = s.v_rule.size();
  s.phase.resize(2, static_cast<Eigen::Index>(nz * nv));
  for (std::size_t i = 0; i < nz; ++i)
    for (std::size_t j = 0; j < nv; ++j) {
      s.phase(0, i * nv + j) = s.z_rule.nodes[i];
      s.phase(1, i * nv + j) = s.v_rule.nodes[j];
    }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  s.boundary.resize(2, spec.nb);
  for (int b = 0; b < spec.nb; ++b) {
    const double r = u(rng);
    double v = 1.0 - r;  // (0, 1]
    if (spec.dim == 2) {
      v = -0.5 * kPi + r * kPi;
      if (v < 0.0) v += 2.0 * kPi;
    }
    s.boundary(0, b) = 0.0;
    s.boundary(1, b) = v;
    s.boundary_data.push_back(spec.inflow(v));
  }
  return s;
}

TapedLoss halfspace_loss(const HalfSpaceSpec& spec, const HalfSpaceSet& set, const Approximant& f, LossTape& tape) {
  using ad::Var;
  const std::size_t nz = set.z_rule.size(), nv = set.v_rule.size();
  const std::vector<int> zcoord{0};
  const JetBlock fb = f.evaluate(tape, set.phase, zcoord, 1);
  const std::span<const double> wavg(set.vel_avg_w);
  std::vector<double> flux_coef(nv);
  for (std::size_t j = 0; j < nv; ++j) flux_coef[j] = set.vel_avg_w[j] * set.dir[j];

  std::vector<Var> res(nz * nv), flux(nz);
  std::vector<double> rw(nz * nv), fw(nz);
  for (std::size_t i = 0; i < nz; ++i) {
    const std::size_t base = i * nv;
    const std::span<const Var> fv(fb.value.data() + base, nv);
    const Var avg = ad::dot(wavg, fv);
    flux[i] = ad::dot(std::span<const double>(flux_coef), fv);
    fw[i] = spec.flux_weight * set.z_rule.weights[i];
    for (std::size_t j = 0; j < nv; ++j) {
      // v.n dz f - (<f> - f)
      const Var terms[] = {fb.d1[0][base + j], avg, fv[j]};
      const double coef[] = {set.dir[j], -1.0, 1.0};
      res[base + j] = ad::dot(coef, terms);
      rw[base + j] = set.z_rule.weights[i] * set.vel_avg_w[j];
    }
  }
  auto wsq = [](std::span<const Var> r, std::span<const double> w) {
    std::vector<Var> sq;
    sq.reserve(r.size());
    for (const Var& x : r) sq.push_back(ad::square(x));
    return ad::dot(w, sq);
  };
  const JetBlock bb = f.evaluate(tape, set.boundary, {}, 0);
  std::vector<Var> bres(bb.size());
  std::vector<double> bw(bb.size(), spec.boundary_weight / static_cast<double>(bb.size()));
  for (std::size_t q = 0; q < bb.size(); ++q) bres[q] = bb.value[q] - set.boundary_data[q];

  TapedLoss loss;
  loss.add("residual", wsq(res, rw));
  loss.add("flux", wsq(flux, fw));
  loss.add("boundary", wsq(bres, bw));
  loss.finalize();
  return loss;
}

double HalfSpaceSolution::value(double z, double v) const {
  if (z > Z) return f_inf;
  if (trivial()) return 0.0;
  const double in[] = {z, v};
  return forward<double, double>(net.params, net.spec, in)[0];
}

double HalfSpaceSolution::max_flux(int samples) const {
  if (samples < 2) throw std::invalid_argument("max_flux: need at least two samples");
  const QuadratureRule r = velocity_rule(dim, dim == 1 ? 64 : 128);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double z = Z * k / (samples - 1);
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double v = r.nodes[j];
      s += r.weights[j] * (dim == 1 ? v : std::cos(v)) * value(z, v);
    }
    worst = std::max(worst, std::abs(s / r.measure()));
  }
  return worst;
}

HalfSpaceSolution solve_halfspace(const HalfSpaceSpec& spec, const HalfSpaceTraining& cfg) {
  spec.validate();
  HalfSpaceSolution sol;
  sol.dim = spec.dim;
  sol.Z = spec.Z;
  const double sup = spec.inflow_sup();
  if (!(sup > 1e-14)) {
    // Zero data: the solution vanishes identically.
    sol.opt.status = OptStatus::kConverged;
    return sol;
  }
  if (!(cfg.ca_factor > 0.0)) throw std::invalid_argument("half-space: ca_factor must be positive");
  const HalfSpaceSet set = make_halfspace_set(spec, cfg.seed);
  ParamLayout layout;
  const int id = layout.add(make_mlp_spec(2, cfg.hidden_layers, cfg.width, 1, OutputActivation::kScaledSigmoid,
                                          cfg.ca_factor * sup));
  LossModel model(layout, [&](LossTape& tape, std::span<const double> theta) {
    return halfspace_loss(spec, set, *layout.network(id, theta), tape);
  });
  sol.opt = two_phase_train(model.loss_grad(), layout.init(cfg.seed), cfg.adam, cfg.lbfgs, cfg.stop, cfg.hooks);
  sol.final_loss = model.breakdown(sol.opt.theta);
  sol.net.spec = layout.spec(id);
  sol.net.params = sol.opt.theta;
  sol.net.seed = cfg.seed;

  // Far-field constant: f(Z, 0) in 1D; angular average at Z in 2D.
  const double z = spec.Z;
  auto raw = [&](double v) {
    const double in[] = {z, v};
    return forward<double, double>(sol.net.params, sol.net.spec, in)[0];
  };
  if (spec.dim == 1) {
    sol.f_inf = raw(0.0);
  } else {
    const QuadratureRule r = velocity_rule(2, 128);
    sol.f_inf = r.integrate_fn(raw) / r.measure();
  }
  return sol;
}

std::vector<HalfSpaceSolution> solve_halfspace_2d(const HalfSpaceSpec& base,
                                                  const std::function<double(double, double)>& phi,
                                                  const std::vector<double>& y_grid, const HalfSpaceTraining& cfg,
                                                  int jobs) {
  if (base.dim != 2) throw std::invalid_argument("solve_halfspace_2d: spec must be 2D");
  if (y_grid.empty()) throw std::invalid_argument("solve_halfspace_2d: empty y grid");
  std::vector<HalfSpaceSolution> out(y_grid.size());
  std::vector<std::string> errors(y_grid.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < y_grid.size();) {
      try {
        HalfSpaceSpec s = base;
        const double y = y_grid[j];
        s.inflow = [phi, y](double a) { return phi(y, a); };
        out[j] = solve_halfspace(s, cfg);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(y_grid.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::string msg;
  for (std::size_t j = 0; j < errors.size(); ++j)
    if (!errors[j].empty()) msg += " y[" + std::to_string(j) + "]: " + errors[j] + ";";
  if (!msg.empty()) throw std::runtime_error("half-space solves failed:" + msg);
  return out;
}

// ---------------------------------------------------------------------------
// Corrector.

GammaCorrector::GammaCorrector(HalfSpaceSolution sol, double epsilon, double x0, std::function<double(double)> sigma_s)
    : dim_(1), eps_(epsilon), x0_(x0), z_max_(sol.Z), sigma_s_(std::move(sigma_s)) {
  if (sol.dim != 1) throw std::invalid_argument("GammaCorrector: 1D constructor needs a 1D solution");
  if (!(epsilon > 0.0)) throw std::invalid_argument("GammaCorrector: epsilon must be positive");
  sols_.push_back(std::move(sol));
}

GammaCorrector::GammaCorrector(std::vector<HalfSpaceSolution> sols, std::vector<double> y_grid, double epsilon,
                               double x0)
    : dim_(2), eps_(epsilon), x0_(x0), sols_(std::move(sols)), y_grid_(std::move(y_grid)) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("GammaCorrector: epsilon must be positive");
  if (sols_.size() != y_grid_.size() || sols_.size() < 2)
    throw std::invalid_argument("GammaCorrector: need one solution per y node (at least two)");
  for (std::size_t j = 1; j < y_grid_.size(); ++j)
    if (!(y_grid_[j] > y_grid_[j - 1])) throw std::invalid_argument("GammaCorrector: y grid must increase");
  z_max_ = sols_.front().Z;
  for (const auto& s : sols_)
    if (s.dim != 2 || s.Z != z_max_) throw std::invalid_argument("GammaCorrector: inconsistent 2D solutions");
}

double GammaCorrector::stretch(double x) const {
  if (dim_ == 2 || !sigma_s_) return (x - x0_) / eps_;
  if (x == x0_) return 0.0;
  const QuadratureRule r = gauss_legendre(20, std::min(x0_, x), std::max(x0_, x));
  const double s = r.integrate_fn(sigma_s_);
  return (x >= x0_ ? s : -s) / eps_;
}

double GammaCorrector::f_inf(double y) const {
  if (dim_ == 1) return sols_[0].f_inf;
  std::size_t j0;
  double t;
  locate(y, j0, t);
  return (1.0 - t) * sols_[j0].f_inf + t * sols_[j0 + 1].f_inf;
}

double GammaCorrector::node_gamma(std::size_t j, double z, double v) const {
  if (z > z_max_) return 0.0;
  return sols_[j].value(z, v) - sols_[j].f_inf;
}

void GammaCorrector::locate(double y, std::size_t& j0, double& t) const {
  const auto it = std::upper_bound(y_grid_.begin(), y_grid_.end(), y);
  std::size_t j = it == y_grid_.begin() ? 0 : static_cast<std::size_t>(it - y_grid_.begin()) - 1;
  j = std::min(j, y_grid_.size() - 2);
  j0 = j;
  t = std::clamp((y - y_grid_[j]) / (y_grid_[j + 1] - y_grid_[j]), 0.0, 1.0);
}

double GammaCorrector::gamma(double x, double y, double v) const {
  const double z = stretch(x);
  if (dim_ == 1) return node_gamma(0, z, v);
  std::size_t j0;
  double t;
  locate(y, j0, t);
  return (1.0 - t) * node_gamma(j0, z, v) + t * node_gamma(j0 + 1, z, v);
}

double GammaCorrector::gamma_dy(double x, double y, double v) const {
  if (dim_ != 2) throw std::logic_error("gamma_dy: 2D correctors only");
  const double z = stretch(x);
  const std::size_t last = y_grid_.size() - 1;
  auto node_dy = [&](std::size_t j) {
    const std::size_t lo = j == 0 ? 0 : j - 1;
    const std::size_t hi = j == last ? last : j + 1;
    return (node_gamma(hi, z, v) - node_gamma(lo, z, v)) / (y_grid_[hi] - y_grid_[lo]);
  };
  std::size_t j0;
  double t;
  locate(y, j0, t);
  return (1.0 - t) * node_dy(j0) + t * node_dy(j0 + 1);
}

JetBlock GammaCorrector::evaluate(LossTape&, const Eigen::MatrixXd& points, std::span<const int> active,
                                  int order) const {
  if (points.rows() != input_dim()) throw std::invalid_argument("GammaCorrector: input dimension mismatch");
  const bool want_dy = order > 0 && !active.empty();
  if (order > 1 || active.size() > 1 || (want_dy && (dim_ != 2 || active[0] != 1)))
    throw std::invalid_argument("GammaCorrector: only the first y partial is available");
  const Eigen::Index n = points.cols();
  Eigen::VectorXd val = Eigen::VectorXd::Zero(n), dy = Eigen::VectorXd::Zero(n);

  // Each point needs Gamma at the node range [lo, hi] (two nodes for the
  // value, up to four for the y difference); node networks run batched.
  const std::size_t nodes = sols_.size(), last = nodes - 1;
  std::vector<std::vector<Eigen::Index>> idx(nodes);
  std::vector<double> z(n), t(n, 0.0);
  std::vector<std::size_t> j0(n, 0), lo(n, 0);
  std::vector<std::array<double, 4>> node_val(n);
  for (Eigen::Index p = 0; p < n; ++p) {
    z[p] = stretch(points(0, p));
    if (z[p] > z_max_) continue;
    std::size_t hi = 0;
    if (dim_ == 2) {
      locate(points(1, p), j0[p], t[p]);
      lo[p] = want_dy && j0[p] > 0 ? j0[p] - 1 : j0[p];
      hi = want_dy ? std::min(j0[p] + 2, last) : j0[p] + 1;
    }
    for (std::size_t j = lo[p]; j <= hi; ++j) idx[j].push_back(p);
  }
  for (std::size_t j = 0; j < nodes; ++j) {
    if (idx[j].empty()) continue;
    const auto& s = sols_[j];
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(idx[j].size()));
    if (!s.trivial()) {
      Eigen::MatrixXd in(2, g.size());
      for (std::size_t k = 0; k < idx[j].size(); ++k) {
        in(0, k) = z[idx[j][k]];
        in(1, k) = points(dim_, idx[j][k]);
      }
      const BatchJet b(s.net.spec, s.net.params, in, {}, 0);
      g = b.value().row(0).transpose().array() - s.f_inf;
    }
    for (std::size_t k = 0; k < idx[j].size(); ++k) node_val[idx[j][k]][j - lo[idx[j][k]]] = g[k];
  }
  for (Eigen::Index p = 0; p < n; ++p) {
    if (z[p] > z_max_) continue;
    const auto& nv = node_val[p];
    if (dim_ == 1) {
      val[p] = nv[0];
      continue;
    }
    const std::size_t a = j0[p], l = lo[p];
    auto at = [&](std::size_t j) { return nv[j - l]; };
    val[p] = (1.0 - t[p]) * at(a) + t[p] * at(a + 1);
    if (want_dy) {
      auto node_dy = [&](std::size_t j) {
        const std::size_t jl = j == 0 ? 0 : j - 1, jh = j == last ? last : j + 1;
        return (at(jh) - at(jl)) / (y_grid_[jh] - y_grid_[jl]);
      };
      dy[p] = (1.0 - t[p]) * node_dy(a) + t[p] * node_dy(a + 1);
    }
  }
  if (want_dy) {
    const Eigen::VectorXd d1[] = {dy};
    return JetBlock::constants(val, d1);
  }
  return JetBlock::constants(val);
}

void save_corrector(const std::string& path, const GammaCorrector& c) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write corrector " + path);
  os << std::setprecision(17);
  os << "rtpinn-corrector 1\n";
  os << "dim " << c.dim() << "\nepsilon " << c.epsilon() << "\nZ " << c.Z() << "\n";
  os << "count " << c.solutions().size() << "\n";
  for (std::size_t j = 0; j < c.solutions().size(); ++j) {
    const auto& s = c.solutions()[j];
    os << "solution " << (c.dim() == 2 ? c.y_grid()[j] : 0.0) << ' ' << s.f_inf << ' ' << (s.trivial() ? "zero" : "net")
       << "\n";
    if (!s.trivial()) write_checkpoint(os, s.net);
  }
}

std::shared_ptr<GammaCorrector> load_corrector(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read corrector " + path);
  auto expect = [&](const std::string& key) {
    std::string got;
    if (!(is >> got) || got != key) throw std::runtime_error("corrector: expected '" + key + "'");
  };
  expect("rtpinn-corrector");
  int version = 0, dim = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("corrector: unsupported version");
  double eps = 0.0, z = 0.0;
  std::size_t count = 0;
  expect("dim");
  is >> dim;
  expect("epsilon");
  is >> eps;
  expect("Z");
  is >> z;
  expect("count");
  is >> count;
  if (!is || (dim != 1 && dim != 2) || count == 0) throw std::runtime_error("corrector: bad header");
  std::vector<HalfSpaceSolution> sols(count);
  std::vector<double> ys(count);
  for (std::size_t j = 0; j < count; ++j) {
    std::string kind;
    expect("solution");
    is >> ys[j] >> sols[j].f_inf >> kind;
    sols[j].dim = dim;
    sols[j].Z = z;
    if (kind == "net") {
      sols[j].net = read_checkpoint(is);
    } else if (kind != "zero") {
      throw std::runtime_error("corrector: unknown solution kind '" + kind + "'");
    }
  }
  if (dim == 1) return std::make_shared<GammaCorrector>(std::move(sols[0]), eps, 0.0);
  return std::make_shared<GammaCorrector>(std::move(sols), std::move(ys), eps, -1.0);
}

}  // namespace rtpinn
