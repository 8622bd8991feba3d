#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rtpinn/approximant.hpp"
#include "rtpinn/losses.hpp"
#include "rtpinn/optim.hpp"

namespace rtpinn {

// Chandrasekhar H-function for the conservative isotropic half-space problem.
//
// 1D: 1/H(mu) = int_0^1 H(w) w / (2 (mu + w)) dw, nodes are v in (0, 1).
// 2D: 1/H(a)  = int_{cos > 0} H(x) cos x / (cos a + cos x) dx, nodes are
//     angles in (0, pi/2); the mirror branch 2 pi - a carries the same H.
// In both cases H depends only on mu = |v . n| and is stored per node.
struct HFunctionTable {
  int dim = 1;
  std::vector<double> nodes;    // v (1D) or alpha in (0, pi/2) (2D)
  std::vector<double> mu;       // |v . n| at the nodes
  std::vector<double> weights;  // quadrature weights of one branch
  std::vector<double> values;   // H at the nodes
  double residual = 0.0;        // sup |1/H - integral| at the nodes
  int iterations = 0;

  std::size_t size() const { return nodes.size(); }
  // H at any mu in [0, 1] through the defining identity (Nystrom extension).
  double operator()(double mu) const;
  // Right-hand side of the defining identity at mu.
  double integral(double mu) const;
};

HFunctionTable chandrasekhar_h_1d(int n = 128, double tol = 1e-13, int max_iter = 100000);
HFunctionTable chandrasekhar_h_2d(int n = 128, double tol = 1e-13, int max_iter = 100000);

// Far-field constant of the half-space problem with inflow phi.
// 1D: phi(v), v in (0, 1]. 2D: phi(alpha) on cos(alpha) > 0.
double f_bl_infinity_1d(const std::function<double(double)>& phi, const HFunctionTable& h);
double f_bl_infinity_2d(const std::function<double(double)>& phi, const HFunctionTable& h);

// Outgoing trace at the wall. 1D: v in [-1, 0); 2D: alpha with cos(alpha) < 0.
double reflection_bc_1d(const std::function<double(double)>& phi, const HFunctionTable& h, double v);
double reflection_bc_2d(const std::function<double(double)>& phi, const HFunctionTable& h, double alpha);

// CSV with a two-line header; the rule is rebuilt from (dim, n) on reading.
void write_hfunction_csv(std::ostream& os, const HFunctionTable& h);
HFunctionTable read_hfunction_csv(std::istream& is);

// Half-space problem  v.n dz f = <f> - f on [0, Z] with inflow data at z = 0,
// truncated with the zero-flux condition <v.n f> = 0.
struct HalfSpaceSpec {
  int dim = 1;
  double Z = 10.0;
  int nz = 400;  // left-endpoint grid on [0, Z)
  int nv = 40;   // Gauss (1D) or periodic uniform (2D) velocity rule
  int nb = 60;   // random inflow samples
  std::function<double(double)> inflow;  // phi(v) or phi(alpha) on the inflow cone
  double flux_weight = 1.0;
  double boundary_weight = 1.0;
  void validate() const;
  // Sup of |phi| over a fine sampling of the inflow cone.
  double inflow_sup() const;
};

struct HalfSpaceTraining {
  int hidden_layers = 4;
  int width = 50;
  double ca_factor = 1.0;  // output bound C_a = ca_factor * sup |phi|
  AdamConfig adam;
  LbfgsConfig lbfgs;
  StopRule stop;
  std::uint64_t seed = 1;
  TrainHooks hooks;
};

// Collocation set of a half-space solve.
struct HalfSpaceSet {
  int dim = 1;
  QuadratureRule z_rule;
  QuadratureRule v_rule;
  Eigen::MatrixXd phase;  // 2 x (nz * nv), velocity fastest
  std::vector<double> dir;        // v.n at the rule nodes (v or cos alpha)
  std::vector<double> vel_avg_w;  // w_j / |S|
  Eigen::MatrixXd boundary;       // 2 x nb at z = 0
  std::vector<double> boundary_data;
};

HalfSpaceSet make_halfspace_set(const HalfSpaceSpec& spec, std::uint64_t seed);

// Terms "residual", "flux", "boundary".
TapedLoss halfspace_loss(const HalfSpaceSpec& spec, const HalfSpaceSet& set, const Approximant& f, LossTape& tape);

struct HalfSpaceSolution {
  int dim = 1;
  double Z = 10.0;
  Checkpoint net;       // empty widths when the solution is identically zero
  double f_inf = 0.0;
  OptResult opt;
  LossBreakdown final_loss;

  bool trivial() const { return net.spec.widths.empty(); }
  double value(double z, double v) const;
  // Max over sampled z of |<v.n f(z, .)>| on a fine velocity rule.
  double max_flux(int samples = 20) const;
};

HalfSpaceSolution solve_halfspace(const HalfSpaceSpec& spec, const HalfSpaceTraining& cfg);

// One solve per y_j with inflow phi(y_j, alpha); independent solves run on up
// to `jobs` threads.
std::vector<HalfSpaceSolution> solve_halfspace_2d(const HalfSpaceSpec& base,
                                                  const std::function<double(double, double)>& phi,
                                                  const std::vector<double>& y_grid, const HalfSpaceTraining& cfg,
                                                  int jobs = 1);

// Boundary-layer corrector on the left wall:
//   1D  Gamma(x, v)        = f_bl(z(x), v) - f_inf,        z = (1/eps) int_0^x sigma_s
//   2D  Gamma(x, y, alpha) = f_bl_y(z(x), alpha) - f_inf(y), z = (x - x0)/eps
// with f_bl := f_inf beyond Z. In 2D the y dependence is piecewise linear
// between the per-node solutions and dGamma/dy uses finite differences on
// the y grid (centered inside, one-sided at the ends).
class GammaCorrector final : public Approximant {
 public:
  GammaCorrector(HalfSpaceSolution sol, double epsilon, double x0 = 0.0,
                 std::function<double(double)> sigma_s = {});
  GammaCorrector(std::vector<HalfSpaceSolution> sols, std::vector<double> y_grid, double epsilon, double x0 = -1.0);

  int input_dim() const override { return dim_ + 1; }
  JetBlock evaluate(LossTape& tape, const Eigen::MatrixXd& points, std::span<const int> active,
                    int order) const override;

  double stretch(double x) const;
  double gamma(double x, double y, double v) const;
  double gamma_dy(double x, double y, double v) const;  // 2D only
  double f_inf(double y = 0.0) const;
  int dim() const { return dim_; }
  double epsilon() const { return eps_; }
  double Z() const { return z_max_; }
  const std::vector<double>& y_grid() const { return y_grid_; }
  const std::vector<HalfSpaceSolution>& solutions() const { return sols_; }

 private:
  // Gamma at node j (no interpolation).
  double node_gamma(std::size_t j, double z, double v) const;
  // Bracketing node pair and linear weight for y.
  void locate(double y, std::size_t& j0, double& t) const;

  int dim_;
  double eps_;
  double x0_;
  double z_max_;
  std::function<double(double)> sigma_s_;
  std::vector<HalfSpaceSolution> sols_;
  std::vector<double> y_grid_;
};

// Checkpoint: metadata header then one network block per solution.
void save_corrector(const std::string& path, const GammaCorrector& c);
std::shared_ptr<GammaCorrector> load_corrector(const std::string& path);

}  // namespace rtpinn
