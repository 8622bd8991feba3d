#include "rtpinn/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace rtpinn {
namespace {

using ad::Var;

Var weighted_squares(std::span<const Var> r, std::span<const double> w) {
  std::vector<Var> sq;
  sq.reserve(r.size());
  for (const Var& x : r) sq.push_back(ad::square(x));
  return ad::dot(w, sq);
}

// Weights of the interior phase grid: spatial weight times w_j / |S|.
std::vector<double> phase_weights(const TrainingSet& ts) {
  std::vector<double> w(ts.np());
  for (std::size_t s = 0; s < ts.ns(); ++s)
    for (std::size_t j = 0; j < ts.nv(); ++j) w[s * ts.nv() + j] = ts.space_weight[s] * ts.vel_avg_w[j];
  return w;
}

std::vector<int> space_coords(int dim) { return dim == 1 ? std::vector<int>{0} : std::vector<int>{0, 1}; }

// Direction components at the training velocities.
struct Directions {
  std::vector<double> cx, cy;
};
Directions directions(const ProblemSpec& spec, const TrainingSet& ts) {
  Directions d;
  for (double v : ts.vel) d.cx.push_back(spec.vx(v)), d.cy.push_back(spec.vy(v));
  return d;
}

// Boundary misfit per face: value(q) - data(q), squared and weighted.
template <class F>
void add_boundary_terms(TapedLoss& loss, const TrainingSet& ts, F&& trace) {
  for (const FaceSamples& fs : ts.faces) {
    std::vector<Var> r = trace(fs);
    std::vector<double> w(fs.size());
    for (std::size_t q = 0; q < fs.size(); ++q) {
      r[q] = r[q] - fs.data[q];
      w[q] = fs.bw * fs.weight[q];
    }
    loss.add("boundary_" + to_string(fs.face), weighted_squares(r, w));
  }
}

// Rows of the dense scattering matrix, contiguous for ad::dot.
std::vector<std::vector<double>> scatter_rows(const TrainingSet& ts) {
  std::vector<std::vector<double>> rows;
  if (!ts.scatter) return rows;
  const Eigen::MatrixXd& a = ts.scatter->matrix();
  rows.assign(a.rows(), std::vector<double>(a.cols()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < a.cols(); ++k) rows[i][k] = a(i, k);
  return rows;
}

void check_dims(const ProblemSpec& spec, const TrainingSet& ts) {
  if (spec.dim != ts.dim) throw std::invalid_argument("loss: problem and training set dimensions differ");
}

// Shared core of the macro-micro loss with an optional frozen corrector.
TapedLoss decomposed_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                          const Approximant& g, const Approximant* gamma, LossTape& tape, bool mean_penalty,
                          bool printed_micro) {
  check_dims(spec, ts);
  const int dim = spec.dim;
  const double eps = spec.epsilon;
  const std::size_t ns = ts.ns(), nv = ts.nv();
  const auto coords = space_coords(dim);
  const JetBlock r = rho.evaluate(tape, ts.space, coords, 1);
  const JetBlock gg = g.evaluate(tape, ts.phase, coords, 1);
  const Directions dir = directions(spec, ts);

  std::vector<double> gam(ts.np(), 0.0), gam_dy(ts.np(), 0.0);
  if (gamma) {
    const std::vector<int> ycoord{1};
    const JetBlock gb = gamma->evaluate(tape, ts.phase, dim == 2 ? std::span<const int>(ycoord) : std::span<const int>(),
                                        dim == 2 ? 1 : 0);
    for (std::size_t p = 0; p < ts.np(); ++p) {
      gam[p] = gb.value[p].value();
      if (dim == 2) gam_dy[p] = gb.d1[0][p].value();
    }
  }

  std::vector<Var> macro(ns), mean(ns), micro(ts.np());
  std::vector<double> avg_coef(2 * nv);
  for (std::size_t j = 0; j < nv; ++j) {
    avg_coef[j] = ts.vel_avg_w[j] * dir.cx[j];
    avg_coef[nv + j] = ts.vel_avg_w[j] * dir.cy[j];
  }
  const std::span<const double> wavg(ts.vel_avg_w);
  const Eigen::MatrixXd* lmat = ts.scatter ? &ts.scatter->matrix() : nullptr;
  const auto lrows = scatter_rows(ts);

  std::vector<Var> buf(2 * nv);
  std::vector<double> src(nv);
  for (std::size_t s = 0; s < ns; ++s) {
    const double x = ts.space(0, s);
    const double y = dim == 2 ? ts.space(1, s) : 0.0;
    const double ss = spec.sigma_s(x, y);
    const double sa = spec.sigma_a(x, y);
    const std::size_t base = s * nv;
    const std::span<const Var> gv(gg.value.data() + base, nv);

    for (std::size_t j = 0; j < nv; ++j) {
      buf[j] = gg.d1[0][base + j];
      buf[nv + j] = dim == 2 ? gg.d1[1][base + j] : Var(0.0);
    }
    const Var avg_vgrad = ad::dot(avg_coef, buf);
    const Var avg_g = ad::dot(wavg, gv);

    double avg_src = 0.0, avg_gam = 0.0, avg_sy = 0.0;
    for (std::size_t j = 0; j < nv; ++j) {
      src[j] = spec.source(x, y, ts.vel[j]);
      avg_src += wavg[j] * src[j];
      avg_gam += wavg[j] * gam[base + j];
      avg_sy += wavg[j] * dir.cy[j] * gam_dy[base + j];
    }

    macro[s] = avg_vgrad + sa * (r.value[s] + avg_gam) + (avg_sy / eps - avg_src);
    mean[s] = avg_g;

    const Var rx = r.d1[0][s];
    const Var ry = dim == 2 ? r.d1[1][s] : Var(0.0);
    for (std::size_t j = 0; j < nv; ++j) {
      const std::size_t p = base + j;
      const double cx = dir.cx[j], cy = dir.cy[j];
      // Scattering of g at this node.
      Var lg;
      if (lmat) {
        lg = ad::dot(lrows[j], gv);
      } else {
        lg = avg_g - gv[j];
      }
      const Var terms[] = {rx, ry, gg.d1[0][p], dim == 2 ? gg.d1[1][p] : Var(0.0), lg, gv[j],
                           printed_micro ? r.value[s] : avg_vgrad};
      if (printed_micro) {
        // v.grad(rho + eps g) + sin(a) Gy - L g + eps sa (rho + eps g + Gamma) - eps G
        const double coef[] = {cx, cy, eps * cx, eps * cy, -ss, eps * eps * sa, eps * sa};
        micro[p] = ad::dot(coef, terms) + (cy * gam_dy[p] + eps * sa * gam[p] - eps * src[j]);
      } else {
        const double coef[] = {cx, cy, eps * cx, eps * cy, -ss, eps * eps * sa, -eps};
        const double forcing = (cy * gam_dy[p] - avg_sy) + eps * sa * (gam[p] - avg_gam) - eps * (src[j] - avg_src);
        micro[p] = ad::dot(coef, terms) + forcing;
      }
    }
  }

  TapedLoss loss;
  loss.add("macro", weighted_squares(macro, ts.space_weight));
  if (mean_penalty) loss.add("mean", weighted_squares(mean, ts.space_weight));
  add_boundary_terms(loss, ts, [&](const FaceSamples& fs) {
    const JetBlock rb = rho.evaluate(tape, fs.space, {}, 0);
    const JetBlock gb = g.evaluate(tape, fs.phase, {}, 0);
    std::vector<double> gm(fs.size(), 0.0);
    if (gamma) {
      const JetBlock cb = gamma->evaluate(tape, fs.phase, {}, 0);
      for (std::size_t q = 0; q < fs.size(); ++q) gm[q] = cb.value[q].value();
    }
    std::vector<Var> out(fs.size());
    for (std::size_t q = 0; q < fs.size(); ++q) out[q] = rb.value[q] + eps * gb.value[q] + gm[q];
    return out;
  });
  loss.add("micro", weighted_squares(micro, phase_weights(ts)));
  loss.finalize();
  return loss;
}

}  // namespace

double LossBreakdown::term(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return t.value;
  throw std::out_of_range("loss term '" + name + "' not present");
}

bool LossBreakdown::has(const std::string& name) const {
  for (const auto& t : terms)
    if (t.name == name) return true;
  return false;
}

void TapedLoss::finalize() {
  std::vector<Var> vs;
  for (const auto& [name, v] : terms) vs.push_back(v);
  total = ad::sum(vs);
}

LossBreakdown TapedLoss::breakdown() const {
  LossBreakdown b;
  b.total = total.value();
  for (const auto& [name, v] : terms) b.terms.push_back({name, v.value()});
  return b;
}

TapedLoss vanilla_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& f, LossTape& tape) {
  check_dims(spec, ts);
  const int dim = spec.dim;
  const double eps = spec.epsilon;
  const std::size_t ns = ts.ns(), nv = ts.nv();
  const auto coords = space_coords(dim);
  const JetBlock fb = f.evaluate(tape, ts.phase, coords, 1);
  const Directions dir = directions(spec, ts);
  const Eigen::MatrixXd* lmat = ts.scatter ? &ts.scatter->matrix() : nullptr;
  const auto lrows = scatter_rows(ts);
  const std::span<const double> wavg(ts.vel_avg_w);

  std::vector<Var> res(ts.np());
  for (std::size_t s = 0; s < ns; ++s) {
    const double x = ts.space(0, s);
    const double y = dim == 2 ? ts.space(1, s) : 0.0;
    const double ss = spec.sigma_s(x, y), sa = spec.sigma_a(x, y);
    const std::size_t base = s * nv;
    const std::span<const Var> fv(fb.value.data() + base, nv);
    const Var avg_f = ad::dot(wavg, fv);
    for (std::size_t j = 0; j < nv; ++j) {
      const std::size_t p = base + j;
      Var lf;
      if (lmat) {
        lf = ad::dot(lrows[j], fv);
      } else {
        lf = avg_f - fv[j];
      }
      // eps v.grad f - sigma_s L f + eps^2 sigma_a f - eps^2 G
      const Var terms[] = {fb.d1[0][p], dim == 2 ? fb.d1[1][p] : Var(0.0), lf, fv[j]};
      const double coef[] = {eps * dir.cx[j], eps * dir.cy[j], -ss, eps * eps * sa};
      res[p] = ad::dot(coef, terms) - eps * eps * spec.source(x, y, ts.vel[j]);
    }
  }
  TapedLoss loss;
  loss.add("residual", weighted_squares(res, phase_weights(ts)));
  add_boundary_terms(loss, ts, [&](const FaceSamples& fs) { return f.evaluate(tape, fs.phase, {}, 0).value; });
  loss.finalize();
  return loss;
}

TapedLoss macro_micro_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                           const Approximant& g, LossTape& tape, bool mean_penalty) {
  return decomposed_loss(spec, ts, rho, g, nullptr, tape, mean_penalty, false);
}

TapedLoss bl_corrected_loss_1d(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                               const Approximant& g, const Approximant& gamma, LossTape& tape,
                               const BoundaryLayerOptions& opt) {
  if (spec.dim != 1) throw std::invalid_argument("bl_corrected_loss_1d: problem is not 1D");
  return decomposed_loss(spec, ts, rho, g, &gamma, tape, opt.mean_penalty, false);
}

TapedLoss bl_corrected_loss_2d(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                               const Approximant& g, const Approximant& gamma, LossTape& tape,
                               const BoundaryLayerOptions& opt) {
  if (spec.dim != 2) throw std::invalid_argument("bl_corrected_loss_2d: problem is not 2D");
  return decomposed_loss(spec, ts, rho, g, &gamma, tape, opt.mean_penalty, opt.printed_micro);
}

TapedLoss hetero_eps_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                          const Approximant& g, LossTape& tape) {
  check_dims(spec, ts);
  if (spec.dim != 1) throw std::invalid_argument("hetero_eps_loss: 1D only");
  const std::size_t ns = ts.ns(), nv = ts.nv();
  const std::vector<int> cx{0};
  const JetBlock r = rho.evaluate(tape, ts.space, cx, 1);
  const JetBlock gg = g.evaluate(tape, ts.phase, cx, 1);
  auto eps_of = [&](double x) { return spec.heterogeneous() ? spec.epsilon_x(x) : spec.epsilon; };
  auto deps_of = [&](double x) { return spec.heterogeneous() ? spec.epsilon_dx(x) : 0.0; };

  std::vector<Var> macro(ns), micro(ts.np());
  std::vector<double> coef(2 * nv);
  std::vector<Var> buf(2 * nv);
  for (std::size_t s = 0; s < ns; ++s) {
    const double x = ts.space(0, s);
    const double e = eps_of(x), de = deps_of(x);
    const std::size_t base = s * nv;
    // <v (eps' g + eps g_x)>
    for (std::size_t j = 0; j < nv; ++j) {
      coef[j] = ts.vel_avg_w[j] * ts.vel[j] * de;
      coef[nv + j] = ts.vel_avg_w[j] * ts.vel[j] * e;
      buf[j] = gg.value[base + j];
      buf[nv + j] = gg.d1[0][base + j];
    }
    macro[s] = ad::dot(coef, buf);
    for (std::size_t j = 0; j < nv; ++j) {
      const std::size_t p = base + j;
      const double v = ts.vel[j];
      // v (rho' + eps' g + eps g_x) + g
      const Var terms[] = {r.d1[0][s], gg.value[p], gg.d1[0][p]};
      const double c[] = {v, v * de + 1.0, v * e};
      micro[p] = ad::dot(c, terms);
    }
  }
  TapedLoss loss;
  loss.add("macro", weighted_squares(macro, ts.space_weight));
  add_boundary_terms(loss, ts, [&](const FaceSamples& fs) {
    const JetBlock rb = rho.evaluate(tape, fs.space, {}, 0);
    const JetBlock gb = g.evaluate(tape, fs.phase, {}, 0);
    std::vector<Var> out(fs.size());
    for (std::size_t q = 0; q < fs.size(); ++q) out[q] = rb.value[q] + eps_of(fs.space(0, q)) * gb.value[q];
    return out;
  });
  loss.add("micro", weighted_squares(micro, phase_weights(ts)));
  loss.finalize();
  return loss;
}

TapedLoss nonlinear_loss(const ProblemSpec& spec, const TrainingSet& ts, const Approximant& rho,
                         const Approximant& g, const Approximant& temperature, const NonlinearConstants& k,
                         LossTape& tape) {
  check_dims(spec, ts);
  if (spec.dim != 1) throw std::invalid_argument("nonlinear_loss: 1D only");
  const double eps = spec.epsilon;
  const std::size_t ns = ts.ns(), nv = ts.nv();
  const std::vector<int> cx{0};
  const JetBlock r = rho.evaluate(tape, ts.space, cx, 1);
  const JetBlock gg = g.evaluate(tape, ts.phase, cx, 1);
  const JetBlock t = temperature.evaluate(tape, ts.space, cx, 2);
  const double sac = k.sigma * k.a * k.c;

  std::vector<Var> macro(ns), heat(ns), micro(ts.np());
  std::vector<double> coef(nv);
  for (std::size_t j = 0; j < nv; ++j) coef[j] = ts.vel_avg_w[j] * ts.vel[j];
  for (std::size_t s = 0; s < ns; ++s) {
    const std::size_t base = s * nv;
    const Var txx = t.d2[0][s];
    macro[s] = ad::dot(coef, std::span<const Var>(gg.d1[0].data() + base, nv)) - txx;
    heat[s] = eps * eps * txx - sac * ad::pow(t.value[s], 4) + k.sigma * r.value[s];
    for (std::size_t j = 0; j < nv; ++j) {
      const std::size_t p = base + j;
      const double v = ts.vel[j];
      // v (rho' + eps g_x) - eps T'' + sigma g
      const Var terms[] = {r.d1[0][s], gg.d1[0][p], txx, gg.value[p]};
      const double c[] = {v, eps * v, -eps, k.sigma};
      micro[p] = ad::dot(c, terms);
    }
  }

  Eigen::MatrixXd ends(1, 2);
  ends << spec.x0, spec.x1;
  const JetBlock tb = temperature.evaluate(tape, ends, {}, 0);

  TapedLoss loss;
  loss.add("macro", weighted_squares(macro, ts.space_weight));
  loss.add("micro", weighted_squares(micro, phase_weights(ts)));
  loss.add("temperature_left", ad::square(tb.value[0] - k.t_left));
  loss.add("temperature_right", ad::square(tb.value[1] - k.t_right));
  loss.add("temperature", weighted_squares(heat, ts.space_weight));
  add_boundary_terms(loss, ts, [&](const FaceSamples& fs) {
    const JetBlock rb = rho.evaluate(tape, fs.space, {}, 0);
    const JetBlock gb = g.evaluate(tape, fs.phase, {}, 0);
    std::vector<Var> out(fs.size());
    for (std::size_t q = 0; q < fs.size(); ++q) out[q] = rb.value[q] + eps * gb.value[q];
    return out;
  });
  loss.finalize();
  return loss;
}

LossGradFn LossModel::loss_grad() const {
  return [this](std::span<const double> theta, std::span<double> grad) {
    LossTape tape;
    const TapedLoss l = build_(tape, theta);
    if (!grad.empty()) {
      const auto gv = tape.gradient(l.total, grad.size());
      std::copy(gv.begin(), gv.end(), grad.begin());
    }
    return l.total.value();
  };
}

LossBreakdown LossModel::breakdown(std::span<const double> theta) const {
  LossTape tape;
  return build_(tape, theta).breakdown();
}

}  // namespace rtpinn
