#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rtpinn/quadrature.hpp"
#include "rtpinn/scattering.hpp"

namespace rtpinn {

// Faces of the spatial box. 1D problems use kLeft (x = x0) and kRight (x = x1).
enum class Face { kLeft = 0, kRight = 1, kBottom = 2, kTop = 3 };
std::string to_string(Face f);

// Velocity parameter: v in [-1, 1] in 1D, angle alpha in [0, 2pi) in 2D with
// direction (cos alpha, sin alpha).
struct ProblemSpec {
  int dim = 1;
  double epsilon = 1.0;
  // Optional position-dependent Knudsen number and its derivative (1D).
  std::function<double(double)> epsilon_x;
  std::function<double(double)> epsilon_dx;
  std::function<double(double x, double y)> sigma_s = [](double, double) { return 1.0; };
  std::function<double(double x, double y)> sigma_a = [](double, double) { return 0.0; };
  std::function<double(double x, double y, double v)> source = [](double, double, double) { return 0.0; };
  KernelSpec kernel;
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  std::function<double(Face, double x, double y, double v)> inflow = [](Face, double, double, double) {
    return 0.0;
  };
  std::array<double, 4> boundary_weights{1.0, 1.0, 1.0, 1.0};

  int num_faces() const { return dim == 1 ? 2 : 4; }
  double velocity_measure() const;
  double velocity_lo() const;
  double velocity_hi() const;
  double eps_at(double x) const { return epsilon_x ? epsilon_x(x) : epsilon; }
  bool heterogeneous() const { return static_cast<bool>(epsilon_x); }
  // Velocity parameter v enters the domain through face f.
  bool is_inflow(Face f, double v) const;
  // Direction components of the velocity parameter.
  double vx(double v) const;
  double vy(double v) const;
  void validate() const;
};

struct TrainingConfig {
  int nx = 80;
  int ny = 40;
  int nv = 60;
  int nb = 60;
  RuleKind x_kind = RuleKind::kTrapezoid;
  // Split layer mesh: nx_layer nodes on [x0, x0 + layer_width), nx on the rest.
  int nx_layer = 0;
  double layer_width = 0.0;
  std::uint64_t seed = 1;
  void validate() const;
};

// Boundary samples on one face: spatial point plus inflow velocity.
struct FaceSamples {
  Face face = Face::kLeft;
  double bw = 1.0;               // face weight B_w
  Eigen::MatrixXd space;         // dim x M
  Eigen::MatrixXd phase;         // (dim + 1) x M
  std::vector<double> v;         // velocity parameter per sample
  std::vector<double> weight;    // quadrature weight per sample
  std::vector<double> data;      // inflow value per sample
  std::size_t size() const { return v.size(); }
};

struct TrainingSet {
  int dim = 1;
  QuadratureRule x_rule, y_rule, v_rule;
  Eigen::MatrixXd space;            // dim x Ns, y fastest in 2D
  Eigen::MatrixXd phase;            // (dim + 1) x (Ns * Nv), velocity fastest
  std::vector<double> space_weight; // Ns
  std::vector<double> vel;          // Nv velocity parameters
  std::vector<double> vel_avg_w;    // w_j / |S|
  std::vector<FaceSamples> faces;
  std::shared_ptr<const ScatteringOperator> scatter;  // anisotropic kernels only

  std::size_t ns() const { return space_weight.size(); }
  std::size_t nv() const { return vel.size(); }
  std::size_t np() const { return ns() * nv(); }
};

// Velocity rule used inside residuals: Gauss on [-1, 1] (1D) or the periodic
// midpoint rule on [0, 2pi) (2D).
QuadratureRule velocity_rule(int dim, int nv);
QuadratureRule spatial_rule(RuleKind kind, int n, double lo, double hi);

TrainingSet make_training_set(const ProblemSpec& spec, const TrainingConfig& cfg);

}  // namespace rtpinn
