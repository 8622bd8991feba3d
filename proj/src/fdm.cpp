#include "rtpinn/fdm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rtpinn/scattering.hpp"

namespace rtpinn {

// ---------------------------------------------------------------------------
// Fields and meshes.

std::vector<double> trapezoid_weights(const std::vector<double>& nodes) {
  const std::size_t n = nodes.size();
  std::vector<double> w(n, 0.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = nodes[i + 1] - nodes[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

void Field::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("field: dim must be 1 or 2");
  if (x.empty() || (dim == 2 && y.empty())) throw std::invalid_argument("field: empty spatial grid");
  if (xw.size() != x.size() || (dim == 2 && yw.size() != y.size()))
    throw std::invalid_argument("field: weight count mismatch");
  if (values.size() != ns() * nv()) throw std::invalid_argument("field: value count mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("field: non-finite value");
}

Field Field::density() const {
  Field d = *this;
  if (!kinetic()) return d;
  d.v = QuadratureRule{};
  d.values.assign(ns(), 0.0);
  const double m = v.measure();
  for (std::size_t s = 0; s < ns(); ++s) {
    double acc = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) acc += v.weights[j] * values[s * v.size() + j];
    d.values[s] = acc / m;
  }
  return d;
}

void Mesh::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("mesh: dim must be 1 or 2");
  auto increasing = [](const std::vector<double>& a) {
    for (std::size_t i = 1; i < a.size(); ++i)
      if (!(a[i] > a[i - 1])) return false;
    return a.size() >= 2;
  };
  if (!increasing(x) || (dim == 2 && !increasing(y)))
    throw std::invalid_argument("mesh: nodes must be strictly increasing (at least two)");
  if (v.size() < 2) throw std::invalid_argument("mesh: velocity rule too small");
}

namespace {

std::vector<double> linspace(double a, double b, int n, bool endpoint) {
  std::vector<double> x(n);
  const double h = (b - a) / (endpoint ? n - 1 : n);
  for (int i = 0; i < n; ++i) x[i] = a + i * h;
  if (endpoint) x.back() = b;
  return x;
}

}  // namespace

Mesh uniform_mesh_1d(double x0, double x1, int nx, int nv) {
  if (nx < 2) throw std::invalid_argument("mesh: nx must be at least 2");
  Mesh m;
  m.dim = 1;
  m.x = linspace(x0, x1, nx, true);
  m.v = velocity_rule(1, nv);
  m.validate();
  return m;
}

Mesh split_mesh_1d(double x0, double x1, double width, int n_layer, int n_rest, int nv) {
  if (n_layer < 1 || n_rest < 2) throw std::invalid_argument("mesh: invalid split counts");
  if (!(width > 0.0) || !(x0 + width < x1)) throw std::invalid_argument("mesh: invalid layer width");
  Mesh m;
  m.dim = 1;
  m.x = linspace(x0, x0 + width, n_layer, false);
  const auto rest = linspace(x0 + width, x1, n_rest, true);
  m.x.insert(m.x.end(), rest.begin(), rest.end());
  m.v = velocity_rule(1, nv);
  m.validate();
  return m;
}

Mesh uniform_mesh_2d(double x0, double x1, double y0, double y1, int nx, int ny, int nv) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("mesh: nx and ny must be at least 2");
  Mesh m;
  m.dim = 2;
  m.x = linspace(x0, x1, nx, true);
  m.y = linspace(y0, y1, ny, true);
  m.v = velocity_rule(2, nv);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Transport sweeps.

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kNotInflow = std::numeric_limits<double>::quiet_NaN();

// Upwind discretization of eps v.grad f + sigma_t f = q per ordinate.
class Transport {
 public:
  Transport(const ProblemSpec& spec, const Mesh& mesh) : spec_(spec), mesh_(mesh) {
    nx_ = mesh.x.size();
    ny_ = spec.dim == 2 ? mesh.y.size() : 1;
    ns_ = nx_ * ny_;
    nv_ = mesh.v.size();
    for (std::size_t j = 0; j < nv_; ++j) {
      cx_.push_back(spec.vx(mesh.v.nodes[j]));
      cy_.push_back(spec.vy(mesh.v.nodes[j]));
      avg_w_.push_back(mesh.v.weights[j] / mesh.v.measure());
    }
    eps_.resize(ns_);
    sig_s_.resize(ns_);
    sig_t_.resize(ns_);
    data_.assign(ns_ * nv_, kNotInflow);
    src_.resize(ns_ * nv_);
    for (std::size_t i = 0; i < nx_; ++i)
      for (std::size_t k = 0; k < ny_; ++k) {
        const std::size_t n = i * ny_ + k;
        const double x = mesh.x[i], y = spec.dim == 2 ? mesh.y[k] : 0.0;
        const double e = spec.eps_at(x);
        eps_[n] = e;
        sig_s_[n] = spec.sigma_s(x, y);
        sig_t_[n] = sig_s_[n] + e * e * spec.sigma_a(x, y);
        for (std::size_t j = 0; j < nv_; ++j) {
          const double v = mesh.v.nodes[j];
          src_[n * nv_ + j] = e * e * spec.source(x, y, v);
          data_[n * nv_ + j] = inflow_value(i, k, j);
        }
      }
  }

  std::size_t ns() const { return ns_; }
  std::size_t nv() const { return nv_; }
  double avg_w(std::size_t j) const { return avg_w_[j]; }
  double sigma_s(std::size_t n) const { return sig_s_[n]; }
  double src(std::size_t n, std::size_t j) const { return src_[n * nv_ + j]; }

  // f_j = sweep of q (node sources) with inflow data (or zeros).
  void sweep(std::size_t j, const double* q, bool with_data, double* f) const {
    visit(j, [&](std::size_t n, double d, std::size_t ux, double ax, std::size_t uy, double ay) {
      const double data = data_[n * nv_ + j];
      if (!std::isnan(data)) {
        f[n] = with_data ? data : 0.0;
        return;
      }
      double s = q[n];
      if (ax > 0.0) s += ax * f[ux];
      if (ay > 0.0) s += ay * f[uy];
      f[n] = s / d;
    });
  }

  // Rows of F: response at every node to a unit density at each node
  // (source sigma_s rho), zero inflow data.
  void sweep_operator(std::size_t j, RowMatrix& f) const {
    f.setZero();
    visit(j, [&](std::size_t n, double d, std::size_t ux, double ax, std::size_t uy, double ay) {
      if (!std::isnan(data_[n * nv_ + j])) return;
      auto row = f.row(static_cast<Eigen::Index>(n));
      if (ax > 0.0) row += ax * f.row(static_cast<Eigen::Index>(ux));
      if (ay > 0.0) row += ay * f.row(static_cast<Eigen::Index>(uy));
      row(static_cast<Eigen::Index>(n)) += sig_s_[n];
      row /= d;
    });
  }

 private:
  double inflow_value(std::size_t i, std::size_t k, std::size_t j) const {
    const double v = mesh_.v.nodes[j];
    const double x = mesh_.x[i], y = spec_.dim == 2 ? mesh_.y[k] : 0.0;
    if (cx_[j] > 0.0 && i == 0) return spec_.inflow(Face::kLeft, x, y, v);
    if (cx_[j] < 0.0 && i == nx_ - 1) return spec_.inflow(Face::kRight, x, y, v);
    if (spec_.dim == 2) {
      if (cy_[j] > 0.0 && k == 0) return spec_.inflow(Face::kBottom, x, y, v);
      if (cy_[j] < 0.0 && k == ny_ - 1) return spec_.inflow(Face::kTop, x, y, v);
    }
    return kNotInflow;
  }

  // Calls fn(node, diagonal, upwind-x node, its coefficient, upwind-y node,
  // its coefficient) in an upwind-consistent order.
  template <class Fn>
  void visit(std::size_t j, Fn&& fn) const {
    const double cx = cx_[j], cy = cy_[j];
    for (std::size_t ii = 0; ii < nx_; ++ii) {
      const std::size_t i = cx >= 0.0 ? ii : nx_ - 1 - ii;
      for (std::size_t kk = 0; kk < ny_; ++kk) {
        const std::size_t k = cy >= 0.0 ? kk : ny_ - 1 - kk;
        const std::size_t n = i * ny_ + k;
        double d = sig_t_[n], ax = 0.0, ay = 0.0;
        std::size_t ux = n, uy = n;
        if (cx > 0.0 && i > 0) {
          ax = eps_[n] * cx / (mesh_.x[i] - mesh_.x[i - 1]);
          ux = n - ny_;
        } else if (cx < 0.0 && i + 1 < nx_) {
          ax = -eps_[n] * cx / (mesh_.x[i + 1] - mesh_.x[i]);
          ux = n + ny_;
        }
        if (spec_.dim == 2) {
          if (cy > 0.0 && k > 0) {
            ay = eps_[n] * cy / (mesh_.y[k] - mesh_.y[k - 1]);
            uy = n - 1;
          } else if (cy < 0.0 && k + 1 < ny_) {
            ay = -eps_[n] * cy / (mesh_.y[k + 1] - mesh_.y[k]);
            uy = n + 1;
          }
        }
        fn(n, d + ax + ay, ux, ax, uy, ay);
      }
    }
  }

  const ProblemSpec& spec_;
  const Mesh& mesh_;
  std::size_t nx_ = 0, ny_ = 0, ns_ = 0, nv_ = 0;
  std::vector<double> cx_, cy_, avg_w_, eps_, sig_s_, sig_t_, data_, src_;
};

// f stored node-major: f[n * nv + j]. Scattered-in source per ordinate
// (K f)_j, the isotropic average for the isotropic kernel.
void scattered(const Transport& t, const MatrixXd* khat, const std::vector<double>& f, std::vector<double>& out) {
  const std::size_t ns = t.ns(), nv = t.nv();
  out.assign(ns * nv, 0.0);
  for (std::size_t n = 0; n < ns; ++n) {
    const double* fn = f.data() + n * nv;
    double* on = out.data() + n * nv;
    if (!khat) {
      double avg = 0.0;
      for (std::size_t j = 0; j < nv; ++j) avg += t.avg_w(j) * fn[j];
      std::fill(on, on + nv, avg);
    } else {
      Eigen::Map<const VectorXd> fv(fn, static_cast<Eigen::Index>(nv));
      Eigen::Map<VectorXd>(on, static_cast<Eigen::Index>(nv)).noalias() = *khat * fv;
    }
  }
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// One transport solve per ordinate with node sources q_j = sigma_s S_j + eps^2 G_j.
void transport_all(const Transport& t, const std::vector<double>& scat, std::vector<double>& f) {
  const std::size_t ns = t.ns(), nv = t.nv();
  std::vector<double> q(ns), fj(ns);
  f.assign(ns * nv, 0.0);
  for (std::size_t j = 0; j < nv; ++j) {
    for (std::size_t n = 0; n < ns; ++n) q[n] = t.sigma_s(n) * scat[n * nv + j] + t.src(n, j);
    t.sweep(j, q.data(), true, fj.data());
    for (std::size_t n = 0; n < ns; ++n) f[n * nv + j] = fj[n];
  }
}

void source_iteration(const Transport& t, const MatrixXd* khat, const FdmOptions& opt, std::vector<double>& f,
                      FdmReport& rep) {
  rep.method = "source-iteration";
  std::vector<double> scat, next;
  f.assign(t.ns() * t.nv(), 0.0);
  for (int it = 1; it <= opt.max_sweeps; ++it) {
    scattered(t, khat, f, scat);
    transport_all(t, scat, next);
    const double change = sup_diff(next, f);
    f.swap(next);
    rep.sweeps = it;
    rep.changes.push_back(change);
    rep.last_change = change;
    if (rep.changes.size() >= 2 && rep.changes[rep.changes.size() - 2] > 0.0)
      rep.spectral_radius = change / rep.changes[rep.changes.size() - 2];
    if (!std::isfinite(change)) throw FdmError("fdm: source iteration diverged", rep);
    if (change < opt.tol) return;
  }
  std::ostringstream os;
  os << "fdm: source iteration stagnated after " << rep.sweeps << " sweeps (change " << rep.last_change
     << ", spectral radius estimate " << rep.spectral_radius << ")";
  throw FdmError(os.str(), rep);
}

// Eliminate the ordinates: rho = P rho + p with P = sum_j w_j F_j. The
// non-isotropic part of the kernel, if any, is lagged in an outer loop whose
// contraction is set by the anisotropy rather than by eps.
void direct_solve(const Transport& t, const MatrixXd* khat, const FdmOptions& opt, std::vector<double>& f,
                  FdmReport& rep) {
  rep.method = "direct";
  const std::size_t ns = t.ns(), nv = t.nv();
  const auto n = static_cast<Eigen::Index>(ns);
  RowMatrix fj(n, n);
  MatrixXd p = MatrixXd::Identity(n, n);
  for (std::size_t j = 0; j < nv; ++j) {
    t.sweep_operator(j, fj);
    p -= t.avg_w(j) * fj;
  }
  const Eigen::PartialPivLU<MatrixXd> lu(p);

  std::vector<double> lag(ns * nv, 0.0), q(ns), col(ns), rhs_acc(ns), prev;
  f.assign(ns * nv, 0.0);
  const int max_outer = khat ? std::max(1, opt.max_sweeps) : 1;
  for (int outer = 1; outer <= max_outer; ++outer) {
    // Response to data, sources and the lagged term.
    VectorXd rhs = VectorXd::Zero(n);
    for (std::size_t j = 0; j < nv; ++j) {
      for (std::size_t s = 0; s < ns; ++s) q[s] = t.src(s, j) + t.sigma_s(s) * lag[s * nv + j];
      t.sweep(j, q.data(), true, col.data());
      for (std::size_t s = 0; s < ns; ++s) rhs[static_cast<Eigen::Index>(s)] += t.avg_w(j) * col[s];
    }
    const VectorXd rho = lu.solve(rhs);
    prev = f;
    for (std::size_t j = 0; j < nv; ++j) {
      for (std::size_t s = 0; s < ns; ++s)
        q[s] = t.sigma_s(s) * (rho[static_cast<Eigen::Index>(s)] + lag[s * nv + j]) + t.src(s, j);
      t.sweep(j, q.data(), true, col.data());
      for (std::size_t s = 0; s < ns; ++s) f[s * nv + j] = col[s];
    }
    rep.sweeps = outer;
    if (!khat) {
      rep.last_change = 0.0;
      return;
    }
    const double change = sup_diff(f, prev);
    rep.changes.push_back(change);
    rep.last_change = change;
    if (rep.changes.size() >= 2 && rep.changes[rep.changes.size() - 2] > 0.0)
      rep.spectral_radius = change / rep.changes[rep.changes.size() - 2];
    if (!std::isfinite(change)) throw FdmError("fdm: anisotropic outer iteration diverged", rep);
    if (change < opt.tol) return;
    // Lagged part: (K f)_j - <f>.
    std::vector<double> kf;
    scattered(t, khat, f, kf);
    for (std::size_t s = 0; s < ns; ++s) {
      double avg = 0.0;
      for (std::size_t j = 0; j < nv; ++j) avg += t.avg_w(j) * f[s * nv + j];
      for (std::size_t j = 0; j < nv; ++j) lag[s * nv + j] = kf[s * nv + j] - avg;
    }
  }
  throw FdmError("fdm: anisotropic outer iteration did not converge", rep);
}

}  // namespace

Field fdm_rte(const ProblemSpec& spec, const Mesh& mesh, const FdmOptions& opt, FdmReport* report) {
  spec.validate();
  mesh.validate();
  if (mesh.dim != spec.dim) throw std::invalid_argument("fdm: mesh and problem dimensions differ");
  if (!(opt.tol > 0.0) || opt.max_sweeps < 1) throw std::invalid_argument("fdm: invalid iteration controls");
  const Transport t(spec, mesh);

  MatrixXd khat;
  const MatrixXd* kp = nullptr;
  if (spec.kernel.kind != KernelKind::kIsotropic) {
    const ScatteringOperator op(spec.kernel, mesh.v);
    khat = op.matrix() + MatrixXd::Identity(op.matrix().rows(), op.matrix().cols());
    kp = &khat;
  }

  FdmSolver solver = opt.solver;
  if (solver == FdmSolver::kAuto) {
    const std::size_t unknowns = t.ns() * t.nv();
    if (spec.dim == 1)
      solver = unknowns <= 100000 ? FdmSolver::kDirect : FdmSolver::kSourceIteration;
    else
      solver = (spec.epsilon < 0.1 && t.ns() <= 6000) ? FdmSolver::kDirect : FdmSolver::kSourceIteration;
  }
  FdmReport rep;
  std::vector<double> f;
  if (solver == FdmSolver::kDirect)
    direct_solve(t, kp, opt, f, rep);
  else
    source_iteration(t, kp, opt, f, rep);
  if (report) *report = rep;

  Field out;
  out.dim = spec.dim;
  out.x = mesh.x;
  out.xw = trapezoid_weights(mesh.x);
  if (spec.dim == 2) {
    out.y = mesh.y;
    out.yw = trapezoid_weights(mesh.y);
  }
  out.v = mesh.v;
  out.values = std::move(f);
  out.validate();
  return out;
}

Field fdm_rte_1d(const ProblemSpec& spec, const Mesh& mesh, const FdmOptions& opt, FdmReport* report) {
  if (spec.dim != 1) throw std::invalid_argument("fdm_rte_1d: problem is not 1D");
  return fdm_rte(spec, mesh, opt, report);
}

Field fdm_rte_2d(const ProblemSpec& spec, const Mesh& mesh, const FdmOptions& opt, FdmReport* report) {
  if (spec.dim != 2) throw std::invalid_argument("fdm_rte_2d: problem is not 2D");
  return fdm_rte(spec, mesh, opt, report);
}

// ---------------------------------------------------------------------------
// Limits.

Field diffusion_limit_solve(const DiffusionProblem& p, const std::vector<double>& x, const std::vector<double>& y) {
  if (p.dim != 1 && p.dim != 2) throw std::invalid_argument("diffusion: dim must be 1 or 2");
  if (!p.boundary || !p.sigma_a || !p.source) throw std::invalid_argument("diffusion: missing data");
  if (!(p.sigma_s > 0.0)) throw std::invalid_argument("diffusion: sigma_s must be positive");
  Mesh check;
  check.dim = p.dim;
  check.x = x;
  check.y = y;
  check.v = velocity_rule(p.dim, 2);
  check.validate();

  const std::size_t nx = x.size(), ny = p.dim == 2 ? y.size() : 1;
  const auto n = static_cast<Eigen::Index>(nx * ny);
  // <v_x^2> is 1/3 for v uniform on [-1, 1] and 1/2 on the unit circle.
  const double d = (p.dim == 1 ? 1.0 / 3.0 : 0.5) / p.sigma_s;
  std::vector<Eigen::Triplet<double>> trip;
  VectorXd rhs = VectorXd::Zero(n);
  auto id = [&](std::size_t i, std::size_t k) { return static_cast<Eigen::Index>(i * ny + k); };
  // Second difference weights on nonuniform nodes.
  auto second = [](const std::vector<double>& z, std::size_t i, double& wl, double& wc, double& wr) {
    const double hl = z[i] - z[i - 1], hr = z[i + 1] - z[i];
    wl = 2.0 / (hl * (hl + hr));
    wr = 2.0 / (hr * (hl + hr));
    wc = -(wl + wr);
  };
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t k = 0; k < ny; ++k) {
      const double xi = x[i], yk = p.dim == 2 ? y[k] : 0.0;
      const bool edge = i == 0 || i + 1 == nx || (p.dim == 2 && (k == 0 || k + 1 == ny));
      const auto r = id(i, k);
      if (edge) {
        trip.emplace_back(r, r, 1.0);
        rhs[r] = p.boundary(xi, yk);
        continue;
      }
      // -(d Lap) rho + sigma_a rho = G
      double wl, wc, wr;
      second(x, i, wl, wc, wr);
      double diag = -d * wc + p.sigma_a(xi, yk);
      trip.emplace_back(r, id(i - 1, k), -d * wl);
      trip.emplace_back(r, id(i + 1, k), -d * wr);
      if (p.dim == 2) {
        second(y, k, wl, wc, wr);
        diag += -d * wc;
        trip.emplace_back(r, id(i, k - 1), -d * wl);
        trip.emplace_back(r, id(i, k + 1), -d * wr);
      }
      trip.emplace_back(r, r, diag);
      rhs[r] = p.source(xi, yk);
    }
  Eigen::SparseMatrix<double> a(n, n);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw std::runtime_error("diffusion: singular system");
  const VectorXd rho = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("diffusion: solve failed");

  Field out;
  out.dim = p.dim;
  out.x = x;
  out.xw = trapezoid_weights(x);
  if (p.dim == 2) {
    out.y = y;
    out.yw = trapezoid_weights(y);
  }
  out.values.assign(rho.data(), rho.data() + rho.size());
  out.validate();
  return out;
}

std::vector<double> nonlinear_limit_solve(double kappa, const std::vector<double>& x) {
  if (!(kappa >= 0.0)) throw std::invalid_argument("nonlinear limit: kappa must be non-negative");
  std::vector<double> t(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = (kappa + 1.0) * (1.0 - x[i]);
    auto p = [&](double s) { return kappa * s * s * s * s + s - r; };
    double lo = 0.0, hi = 1.0;
    if (p(lo) >= 0.0) {
      t[i] = 0.0;
      continue;
    }
    if (p(hi) <= 0.0) {
      t[i] = 1.0;
      continue;
    }
    // Newton with a bisection safeguard on the bracket [lo, hi].
    double s = r / (kappa + 1.0);
    for (int it = 0; it < 200; ++it) {
      const double ps = p(s);
      if (ps == 0.0) break;
      (ps < 0.0 ? lo : hi) = s;
      const double dp = 4.0 * kappa * s * s * s + 1.0;
      double next = s - ps / dp;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) <= 1e-16 * std::max(1.0, std::abs(s))) {
        s = next;
        break;
      }
      s = next;
    }
    t[i] = s;
  }
  return t;
}

NonlinearFdmResult fdm_nonlinear_1d(const NonlinearFdmSpec& sp, const Mesh& mesh) {
  mesh.validate();
  if (mesh.dim != 1) throw std::invalid_argument("fdm_nonlinear_1d: 1D mesh required");
  if (!(sp.epsilon > 0.0) || !(sp.sigma > 0.0) || !(sp.a > 0.0) || !(sp.c > 0.0))
    throw std::invalid_argument("fdm_nonlinear_1d: constants must be positive");
  const std::size_t nx = mesh.x.size(), nv = mesh.v.size();
  const auto n = static_cast<Eigen::Index>(nx);
  const double eps = sp.epsilon, sig = sp.sigma, ac = sp.a * sp.c;
  const auto& x = mesh.x;

  // Diamond difference per ordinate: I = Tj u + tj with u = a c T^4.
  // Tj is accumulated into P = sum_j w_j Tj; tj into p.
  MatrixXd pm = MatrixXd::Zero(n, n);
  VectorXd pv = VectorXd::Zero(n);
  std::vector<MatrixXd> tmat(nv);
  std::vector<VectorXd> tvec(nv);
  for (std::size_t j = 0; j < nv; ++j) {
    const double v = mesh.v.nodes[j];
    const double w = mesh.v.weights[j] / mesh.v.measure();
    MatrixXd tj = MatrixXd::Zero(n, n);
    VectorXd cj = VectorXd::Zero(n);
    const bool right = v > 0.0;
    const Eigen::Index first = right ? 0 : n - 1;
    cj[first] = right ? sp.i_left : sp.i_right;
    for (Eigen::Index s = 1; s < n; ++s) {
      const Eigen::Index i = right ? s : n - 1 - s;
      const Eigen::Index up = right ? i - 1 : i + 1;
      const double h = std::abs(x[i] - x[up]);
      const double a = eps * std::abs(v) / h;
      const double d = a + 0.5 * sig;
      const double b = (a - 0.5 * sig) / d;
      tj.row(i) = b * tj.row(up);
      tj(i, i) += 0.5 * sig / d;
      tj(i, up) += 0.5 * sig / d;
      cj[i] = b * cj[up];
    }
    pm += w * tj;
    pv += w * cj;
    tmat[j] = std::move(tj);
    tvec[j] = std::move(cj);
  }

  // Newton on F(T) = eps^2 D2 T - sigma (u - P u - p), Dirichlet ends.
  MatrixXd d2 = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double hl = x[i] - x[i - 1], hr = x[i + 1] - x[i];
    d2(i, i - 1) = 2.0 / (hl * (hl + hr));
    d2(i, i + 1) = 2.0 / (hr * (hl + hr));
    d2(i, i) = -(d2(i, i - 1) + d2(i, i + 1));
  }
  const double kappa = ac / (3.0 * sig);
  const auto t0 = nonlinear_limit_solve(kappa, x);
  VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i)
    t[i] = sp.t_right + (sp.t_left - sp.t_right) * t0[i];  // limit profile rescaled to the end values
  t[0] = sp.t_left;
  t[n - 1] = sp.t_right;

  auto residual = [&](const VectorXd& tt) {
    const VectorXd u = ac * tt.array().pow(4).matrix();
    VectorXd f = eps * eps * (d2 * tt) - sig * (u - pm * u - pv);
    f[0] = tt[0] - sp.t_left;
    f[n - 1] = tt[n - 1] - sp.t_right;
    return f;
  };
  NonlinearFdmResult res;
  VectorXd f = residual(t);
  for (int it = 1; it <= sp.max_newton; ++it) {
    const VectorXd du = 4.0 * ac * t.array().pow(3).matrix();
    MatrixXd jac = eps * eps * d2 - sig * (MatrixXd::Identity(n, n) - pm) * du.asDiagonal();
    jac.row(0).setZero();
    jac(0, 0) = 1.0;
    jac.row(n - 1).setZero();
    jac(n - 1, n - 1) = 1.0;
    const VectorXd step = jac.partialPivLu().solve(-f);
    double lambda = 1.0;
    VectorXd trial = t + step;
    VectorXd ft = residual(trial);
    while (ft.norm() > f.norm() && lambda > 1e-6) {
      lambda *= 0.5;
      trial = t + lambda * step;
      ft = residual(trial);
    }
    t = trial;
    f = ft;
    res.newton_iterations = it;
    if (lambda * step.lpNorm<Eigen::Infinity>() < sp.tol) break;
  }
  res.residual = f.lpNorm<Eigen::Infinity>();
  if (!std::isfinite(res.residual) || res.residual > 1e-8)
    throw std::runtime_error("fdm_nonlinear_1d: Newton did not converge (residual " + std::to_string(res.residual) +
                             ")");

  const VectorXd u = ac * t.array().pow(4).matrix();
  res.temperature.dim = 1;
  res.temperature.x = x;
  res.temperature.xw = trapezoid_weights(x);
  res.temperature.values.assign(t.data(), t.data() + n);
  res.intensity.dim = 1;
  res.intensity.x = x;
  res.intensity.xw = res.temperature.xw;
  res.intensity.v = mesh.v;
  res.intensity.values.assign(nx * nv, 0.0);
  for (std::size_t j = 0; j < nv; ++j) {
    const VectorXd ij = tmat[j] * u + tvec[j];
    for (std::size_t i = 0; i < nx; ++i) res.intensity.values[i * nv + j] = ij[static_cast<Eigen::Index>(i)];
  }
  res.temperature.validate();
  res.intensity.validate();
  return res;
}

// ---------------------------------------------------------------------------
// Field IO.

namespace {

void write_list(std::ostream& os, const char* key, const std::vector<double>& a) {
  os << "# " << key;
  for (double v : a) os << ' ' << v;
  os << '\n';
}

std::vector<double> read_list(std::istream& is, const std::string& key, std::size_t n) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("field CSV: missing '" + key + "'");
  std::istringstream ls(line);
  std::string hash, got;
  ls >> hash >> got;
  if (hash != "#" || got != key) throw std::runtime_error("field CSV: expected '" + key + "'");
  std::vector<double> a(n);
  for (auto& v : a)
    if (!(ls >> v)) throw std::runtime_error("field CSV: short '" + key + "' list");
  return a;
}

}  // namespace

void write_field_csv(std::ostream& os, const Field& f) {
  f.validate();
  os << std::setprecision(17);
  os << "# rtpinn-field 1 dim " << f.dim << " nx " << f.nx() << " ny " << (f.dim == 2 ? f.y.size() : 0) << " nv "
     << f.v.size() << " lo " << f.v.lo << " hi " << f.v.hi << '\n';
  write_list(os, "xw", f.xw);
  if (f.dim == 2) write_list(os, "yw", f.yw);
  if (f.kinetic()) write_list(os, "vw", f.v.weights);
  os << "x";
  if (f.dim == 2) os << ",y";
  if (f.kinetic()) os << ",v";
  os << ",value\n";
  for (std::size_t i = 0; i < f.nx(); ++i)
    for (std::size_t k = 0; k < f.ny(); ++k)
      for (std::size_t j = 0; j < f.nv(); ++j) {
        os << f.x[i];
        if (f.dim == 2) os << ',' << f.y[k];
        if (f.kinetic()) os << ',' << f.v.nodes[j];
        os << ',' << f.at(i, k, j) << '\n';
      }
}

Field read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("field CSV: empty input");
  std::istringstream hs(line);
  std::string hash, tag, k;
  int version = 0;
  Field f;
  std::size_t nx = 0, ny = 0, nv = 0;
  hs >> hash >> tag >> version;
  if (tag != "rtpinn-field" || version != 1) throw std::runtime_error("field CSV: bad header");
  hs >> k >> f.dim >> k >> nx >> k >> ny >> k >> nv >> k >> f.v.lo >> k >> f.v.hi;
  if (!hs || (f.dim != 1 && f.dim != 2)) throw std::runtime_error("field CSV: bad header fields");
  f.xw = read_list(is, "xw", nx);
  if (f.dim == 2) f.yw = read_list(is, "yw", ny);
  if (nv > 0) f.v.weights = read_list(is, "vw", nv);
  std::getline(is, line);  // column names
  const std::size_t rows = nx * (f.dim == 2 ? ny : 1) * std::max<std::size_t>(nv, 1);
  f.x.resize(nx);
  if (f.dim == 2) f.y.resize(ny);
  f.v.nodes.resize(nv);
  f.values.resize(rows);
  const std::size_t nyy = f.dim == 2 ? ny : 1, nvv = std::max<std::size_t>(nv, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(is, line)) throw std::runtime_error("field CSV: truncated");
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double xv = 0.0, yv = 0.0, vv = 0.0, val = 0.0;
    ls >> xv;
    if (f.dim == 2) ls >> yv;
    if (nv > 0) ls >> vv;
    ls >> val;
    if (!ls) throw std::runtime_error("field CSV: malformed row");
    const std::size_t i = r / (nyy * nvv), kk = (r / nvv) % nyy, j = r % nvv;
    f.x[i] = xv;
    if (f.dim == 2) f.y[kk] = yv;
    if (nv > 0) f.v.nodes[j] = vv;
    f.values[r] = val;
  }
  f.validate();
  return f;
}

namespace {

constexpr char kMagic[8] = {'R', 'T', 'F', 'I', 'E', 'L', 'D', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  put_u64(os, u);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("field binary: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t u = get_u64(is);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

void put_vec(std::ostream& os, const std::vector<double>& a) {
  for (double v : a) put_f64(os, v);
}

std::vector<double> get_vec(std::istream& is, std::size_t n) {
  std::vector<double> a(n);
  for (auto& v : a) v = get_f64(is);
  return a;
}

}  // namespace

void write_field_binary(std::ostream& os, const Field& f) {
  f.validate();
  os.write(kMagic, 8);
  put_u64(os, static_cast<std::uint64_t>(f.dim));
  put_u64(os, f.nx());
  put_u64(os, f.dim == 2 ? f.y.size() : 0);
  put_u64(os, f.v.size());
  put_f64(os, f.v.lo);
  put_f64(os, f.v.hi);
  put_vec(os, f.x);
  put_vec(os, f.xw);
  put_vec(os, f.y);
  put_vec(os, f.yw);
  put_vec(os, f.v.nodes);
  put_vec(os, f.v.weights);
  put_vec(os, f.values);
}

Field read_field_binary(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("field binary: bad magic");
  Field f;
  f.dim = static_cast<int>(get_u64(is));
  const std::size_t nx = get_u64(is), ny = get_u64(is), nv = get_u64(is);
  if ((f.dim != 1 && f.dim != 2) || nx > (1u << 26) || ny > (1u << 26) || nv > (1u << 20))
    throw std::runtime_error("field binary: bad header");
  f.v.lo = get_f64(is);
  f.v.hi = get_f64(is);
  f.x = get_vec(is, nx);
  f.xw = get_vec(is, nx);
  f.y = get_vec(is, ny);
  f.yw = get_vec(is, ny);
  f.v.nodes = get_vec(is, nv);
  f.v.weights = get_vec(is, nv);
  f.values = get_vec(is, nx * (f.dim == 2 ? ny : 1) * std::max<std::size_t>(nv, 1));
  f.validate();
  return f;
}

void save_field(const std::string& path, const Field& f) {
  const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot write field " + path);
  if (binary)
    write_field_binary(os, f);
  else
    write_field_csv(os, f);
  if (!os) throw std::runtime_error("error writing field " + path);
}

Field load_field(const std::string& path) {
  const bool binary = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw std::runtime_error("cannot read field " + path);
  return binary ? read_field_binary(is) : read_field_csv(is);
}

}  // namespace rtpinn
