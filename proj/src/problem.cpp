#include "rtpinn/problem.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rtpinn {

std::string to_string(Face f) {
  switch (f) {
    case Face::kLeft: return "left";
    case Face::kRight: return "right";
    case Face::kBottom: return "bottom";
    case Face::kTop: return "top";
  }
  return "left";
}

double ProblemSpec::velocity_measure() const { return dim == 1 ? 2.0 : 2.0 * std::numbers::pi; }
double ProblemSpec::velocity_lo() const { return dim == 1 ? -1.0 : 0.0; }
double ProblemSpec::velocity_hi() const { return dim == 1 ? 1.0 : 2.0 * std::numbers::pi; }

double ProblemSpec::vx(double v) const { return dim == 1 ? v : std::cos(v); }
double ProblemSpec::vy(double v) const { return dim == 1 ? 0.0 : std::sin(v); }

bool ProblemSpec::is_inflow(Face f, double v) const {
  switch (f) {
    case Face::kLeft: return vx(v) > 0.0;
    case Face::kRight: return vx(v) < 0.0;
    case Face::kBottom: return vy(v) > 0.0;
    case Face::kTop: return vy(v) < 0.0;
  }
  return false;
}

void ProblemSpec::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("problem: dim must be 1 or 2");
  if (!(epsilon > 0.0) && !epsilon_x) throw std::invalid_argument("problem: epsilon must be positive");
  if (epsilon_x && dim != 1) throw std::invalid_argument("problem: position-dependent epsilon is 1D only");
  if (epsilon_x && !epsilon_dx) throw std::invalid_argument("problem: epsilon(x) requires its derivative");
  if (!(x1 > x0) || (dim == 2 && !(y1 > y0))) throw std::invalid_argument("problem: empty domain");
  kernel.validate();
  if (dim == 1 && kernel.kind != KernelKind::kIsotropic)
    throw std::invalid_argument("problem: 1D problems support the isotropic kernel only");
  for (double w : boundary_weights)
    if (!(w > 0.0)) throw std::invalid_argument("problem: boundary weights must be positive");
  if (!sigma_s || !sigma_a || !source || !inflow) throw std::invalid_argument("problem: missing coefficient");
}

void TrainingConfig::validate() const {
  if (nx < 2 || nv < 2 || nb < 1) throw std::invalid_argument("training set: counts must be positive");
  if (nx_layer < 0 || (nx_layer > 0 && !(layer_width > 0.0)))
    throw std::invalid_argument("training set: invalid layer mesh");
}

QuadratureRule velocity_rule(int dim, int nv) {
  if (dim == 1) return gauss_legendre(nv, -1.0, 1.0);
  // Midpoint nodes: no node sits on alpha = 0 (a seam for data given as a
  // function of alpha) or, for nv divisible by 4, on a grazing direction.
  const double half = std::numbers::pi / nv;
  QuadratureRule r = uniform_rule(nv, half, 2.0 * std::numbers::pi + half, false);
  r.lo = 0.0;
  r.hi = 2.0 * std::numbers::pi;
  return r;
}

QuadratureRule spatial_rule(RuleKind kind, int n, double lo, double hi) {
  switch (kind) {
    case RuleKind::kGaussLegendre: return gauss_legendre(n, lo, hi);
    case RuleKind::kUniform: return uniform_rule(n, lo, hi, false);
    case RuleKind::kTrapezoid: return uniform_rule(n, lo, hi, true);
  }
  return uniform_rule(n, lo, hi, true);
}

namespace {

// Uniform random velocity parameter in the inflow cone of a face.
double sample_inflow(const ProblemSpec& spec, Face f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  constexpr double pi = std::numbers::pi;
  if (spec.dim == 1) return f == Face::kLeft ? 1.0 - r : -1.0 + r * (1.0 - 1e-12);
  double a = 0.0;
  switch (f) {
    case Face::kLeft: a = -0.5 * pi + r * pi; break;
    case Face::kRight: a = 0.5 * pi + r * pi; break;
    case Face::kBottom: a = r * pi; break;
    case Face::kTop: a = pi + r * pi; break;
  }
  if (a < 0.0) a += 2.0 * pi;
  return a;
}

}  // namespace

TrainingSet make_training_set(const ProblemSpec& spec, const TrainingConfig& cfg) {
  spec.validate();
  cfg.validate();
  TrainingSet ts;
  ts.dim = spec.dim;
  if (cfg.nx_layer > 0) {
    const double split = spec.x0 + cfg.layer_width;
    if (!(split < spec.x1)) throw std::invalid_argument("training set: layer wider than the domain");
    ts.x_rule = concatenate(uniform_rule(cfg.nx_layer, spec.x0, split, false),
                            spatial_rule(cfg.x_kind, cfg.nx, split, spec.x1));
  } else {
    ts.x_rule = spatial_rule(cfg.x_kind, cfg.nx, spec.x0, spec.x1);
  }
  if (spec.dim == 2) ts.y_rule = spatial_rule(cfg.x_kind, cfg.ny, spec.y0, spec.y1);
  ts.v_rule = velocity_rule(spec.dim, cfg.nv);

  const std::size_t nxs = ts.x_rule.size();
  const std::size_t nys = spec.dim == 2 ? ts.y_rule.size() : 1;
  const std::size_t nv = ts.v_rule.size();
  if (spec.kernel.kind != KernelKind::kIsotropic)
    ts.scatter = std::make_shared<ScatteringOperator>(spec.kernel, ts.v_rule);
  ts.vel = ts.v_rule.nodes;
  for (double w : ts.v_rule.weights) ts.vel_avg_w.push_back(w / ts.v_rule.measure());

  ts.space.resize(spec.dim, static_cast<Eigen::Index>(nxs * nys));
  ts.phase.resize(spec.dim + 1, static_cast<Eigen::Index>(nxs * nys * nv));
  Eigen::Index s = 0, p = 0;
  for (std::size_t i = 0; i < nxs; ++i) {
    for (std::size_t k = 0; k < nys; ++k, ++s) {
      ts.space(0, s) = ts.x_rule.nodes[i];
      double w = ts.x_rule.weights[i];
      if (spec.dim == 2) {
        ts.space(1, s) = ts.y_rule.nodes[k];
        w *= ts.y_rule.weights[k];
      }
      ts.space_weight.push_back(w);
      for (std::size_t j = 0; j < nv; ++j, ++p) {
        ts.phase.block(0, p, spec.dim, 1) = ts.space.col(s);
        ts.phase(spec.dim, p) = ts.vel[j];
      }
    }
  }

  std::mt19937_64 rng(cfg.seed);
  for (int fi = 0; fi < spec.num_faces(); ++fi) {
    const Face f = static_cast<Face>(fi);
    FaceSamples fs;
    fs.face = f;
    fs.bw = spec.boundary_weights[fi];
    // Spatial nodes along the face with their weights.
    std::vector<std::array<double, 2>> pts;
    std::vector<double> pw;
    if (spec.dim == 1) {
      pts.push_back({f == Face::kLeft ? spec.x0 : spec.x1, 0.0});
      pw.push_back(1.0);
    } else if (f == Face::kLeft || f == Face::kRight) {
      const double x = f == Face::kLeft ? spec.x0 : spec.x1;
      for (std::size_t k = 0; k < ts.y_rule.size(); ++k) pts.push_back({x, ts.y_rule.nodes[k]}), pw.push_back(ts.y_rule.weights[k]);
    } else {
      const double y = f == Face::kBottom ? spec.y0 : spec.y1;
      const QuadratureRule xr = spatial_rule(cfg.x_kind, cfg.nx, spec.x0, spec.x1);
      for (std::size_t i = 0; i < xr.size(); ++i) pts.push_back({xr.nodes[i], y}), pw.push_back(xr.weights[i]);
    }
    const std::size_t m = pts.size() * static_cast<std::size_t>(cfg.nb);
    fs.space.resize(spec.dim, static_cast<Eigen::Index>(m));
    fs.phase.resize(spec.dim + 1, static_cast<Eigen::Index>(m));
    Eigen::Index q = 0;
    for (std::size_t a = 0; a < pts.size(); ++a) {
      for (int b = 0; b < cfg.nb; ++b, ++q) {
        const double v = sample_inflow(spec, f, rng);
        for (int d = 0; d < spec.dim; ++d) fs.space(d, q) = fs.phase(d, q) = pts[a][d];
        fs.phase(spec.dim, q) = v;
        fs.v.push_back(v);
        fs.weight.push_back(pw[a] / cfg.nb);
        fs.data.push_back(spec.inflow(f, pts[a][0], pts[a][1], v));
      }
    }
    ts.faces.push_back(std::move(fs));
  }
  return ts;
}

}  // namespace rtpinn
