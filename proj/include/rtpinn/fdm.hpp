#pragma once

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtpinn/problem.hpp"
#include "rtpinn/quadrature.hpp"

namespace rtpinn {

// Grid samples of a kinetic field f(x[, y], v) or a density rho(x[, y]).
// Layout: x slowest, then y, then velocity fastest.
struct Field {
  int dim = 1;
  std::vector<double> x, y;    // y empty in 1D
  std::vector<double> xw, yw;  // spatial weights for error sums
  QuadratureRule v;            // no nodes for a density field
  std::vector<double> values;

  std::size_t nx() const { return x.size(); }
  std::size_t ny() const { return dim == 2 ? y.size() : 1; }
  std::size_t nv() const { return v.size() == 0 ? 1 : v.size(); }
  std::size_t ns() const { return nx() * ny(); }
  bool kinetic() const { return v.size() > 0; }
  std::size_t index(std::size_t i, std::size_t k, std::size_t j) const { return (i * ny() + k) * nv() + j; }
  double at(std::size_t i, std::size_t k, std::size_t j) const { return values[index(i, k, j)]; }
  double& at(std::size_t i, std::size_t k, std::size_t j) { return values[index(i, k, j)]; }
  // Velocity average per spatial node (the field itself for densities).
  Field density() const;
  void validate() const;
};

// Trapezoid weights for arbitrary increasing nodes.
std::vector<double> trapezoid_weights(const std::vector<double>& nodes);

struct Mesh {
  int dim = 1;
  std::vector<double> x, y;
  QuadratureRule v;
  void validate() const;
};

// Velocity rules: Gauss on [-1, 1] in 1D, periodic uniform on [0, 2 pi) in 2D.
Mesh uniform_mesh_1d(double x0, double x1, int nx, int nv);
// n_layer nodes on [x0, x0 + width) then n_rest on [x0 + width, x1].
Mesh split_mesh_1d(double x0, double x1, double width, int n_layer, int n_rest, int nv);
Mesh uniform_mesh_2d(double x0, double x1, double y0, double y1, int nx, int ny, int nv);

enum class FdmSolver { kAuto, kSourceIteration, kDirect };

struct FdmOptions {
  FdmSolver solver = FdmSolver::kAuto;
  double tol = 1e-10;
  int max_sweeps = 100000;
};

struct FdmReport {
  std::string method;
  int sweeps = 0;
  double last_change = 0.0;
  double spectral_radius = 0.0;   // ratio of the last two changes
  std::vector<double> changes;    // sup-norm update per sweep
};

class FdmError : public std::runtime_error {
 public:
  FdmError(const std::string& what, FdmReport report) : std::runtime_error(what), report_(std::move(report)) {}
  const FdmReport& report() const { return report_; }

 private:
  FdmReport report_;
};

// Discrete ordinates with first-order upwind differences; inflow data
// imposed strongly. Direct mode eliminates the ordinates and solves a dense
// system for the density (anisotropic kernels add an outer iteration on the
// non-isotropic part of the scattering). Source iteration is the fallback.
Field fdm_rte(const ProblemSpec& spec, const Mesh& mesh, const FdmOptions& opt = {}, FdmReport* report = nullptr);
Field fdm_rte_1d(const ProblemSpec& spec, const Mesh& mesh, const FdmOptions& opt = {}, FdmReport* report = nullptr);
Field fdm_rte_2d(const ProblemSpec& spec, const Mesh& mesh, const FdmOptions& opt = {}, FdmReport* report = nullptr);

// Diffusion limit  (<v_x^2>/sigma_s) Lap rho - sigma_a rho + G = 0 with
// Dirichlet data, second-order centered differences on the mesh nodes.
// <v_x^2> = 1/3 in 1D (v uniform on [-1, 1]) and 1/2 in 2D.
struct DiffusionProblem {
  int dim = 1;
  double sigma_s = 1.0;
  std::function<double(double, double)> sigma_a = [](double, double) { return 0.0; };
  std::function<double(double, double)> source = [](double, double) { return 0.0; };
  std::function<double(double, double)> boundary;  // Dirichlet data
};
Field diffusion_limit_solve(const DiffusionProblem& p, const std::vector<double>& x, const std::vector<double>& y = {});

// Root T in [0, 1] of kappa T^4 + T = (kappa + 1)(1 - x) at each node.
std::vector<double> nonlinear_limit_solve(double kappa, const std::vector<double>& x);

struct NonlinearFdmResult {
  Field intensity;    // I(x, v)
  Field temperature;  // T(x)
  int newton_iterations = 0;
  double residual = 0.0;
};

// eps v I_x = sigma (a c T^4 - I),  eps^2 T_xx = sigma (a c T^4 - <I>) on
// [0, 1] with I(0, v>0) = i_left, I(1, v<0) = i_right and Dirichlet T.
// Diamond differences for I, eliminated into a dense Newton system for T.
struct NonlinearFdmSpec {
  double epsilon = 1.0;
  double a = 1.0, c = 1.0, sigma = 1.0;
  double i_left = 1.0, i_right = 0.0;
  double t_left = 1.0, t_right = 0.0;
  double tol = 1e-12;
  int max_newton = 100;
};
NonlinearFdmResult fdm_nonlinear_1d(const NonlinearFdmSpec& spec, const Mesh& mesh);

// CSV: coordinate columns then value, 17 significant digits.
void write_field_csv(std::ostream& os, const Field& f);
Field read_field_csv(std::istream& is);
// Binary: magic, dims, counts, nodes, weights, values (little-endian doubles).
void write_field_binary(std::ostream& os, const Field& f);
Field read_field_binary(std::istream& is);
void save_field(const std::string& path, const Field& f);  // by extension: .csv or .bin
Field load_field(const std::string& path);

}  // namespace rtpinn
