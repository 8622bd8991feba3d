#include "rtpinn/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace rtpinn {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_bl_id(const std::string& id) { return id == "ex5.6" || id == "pitfall-weights" || id == "pitfall-mesh"; }
bool is_halfspace_id(const std::string& id) { return id == "ex5.5" || id == "ex5.7"; }
bool is_toy_id(const std::string& id) { return id == "toy-vanilla" || id == "toy-mm"; }

// ---------------------------------------------------------------------------
// Scalar parsing with whole-string checks.

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return i;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  const long long i = to_integer(key, v);
  if (i < -2147483647LL || i > 2147483647LL) throw ConfigError("config: '" + key + "' out of range");
  return static_cast<int>(i);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

// -1 auto, 0 off, 1 on.
int to_tristate(const std::string& key, const std::string& v) { return v == "auto" ? -1 : (to_bool(key, v) ? 1 : 0); }
std::string tristate(int t) { return t < 0 ? "auto" : (t ? "true" : "false"); }

std::string num(double d) {
  std::ostringstream os;
  os << std::setprecision(17) << d;
  return os.str();
}

RuleKind to_rule(const std::string& key, const std::string& v) {
  for (RuleKind k : {RuleKind::kGaussLegendre, RuleKind::kUniform, RuleKind::kTrapezoid})
    if (to_string(k) == v) return k;
  throw ConfigError("config: '" + key + "' must be gauss-legendre, uniform or trapezoid");
}

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define RTPINN_DOUBLE(key, member)                                                                   \
  Key {                                                                                              \
    key, [](ExperimentConfig& c, const std::string& v) { c.member = to_double(key, v); },            \
        [](const ExperimentConfig& c) { return num(c.member); }                                      \
  }
#define RTPINN_INT(key, member)                                                                      \
  Key {                                                                                              \
    key, [](ExperimentConfig& c, const std::string& v) { c.member = to_int(key, v); },               \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }                           \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      RTPINN_DOUBLE("epsilon", epsilon),
      RTPINN_INT("hidden_layers", hidden_layers),
      RTPINN_INT("width", width),
      RTPINN_INT("nx", train.nx),
      RTPINN_INT("ny", train.ny),
      RTPINN_INT("nv", train.nv),
      RTPINN_INT("nb", train.nb),
      Key{"x_rule", [](ExperimentConfig& c, const std::string& v) { c.train.x_kind = to_rule("x_rule", v); },
          [](const ExperimentConfig& c) { return to_string(c.train.x_kind); }},
      RTPINN_INT("nx_layer", train.nx_layer),
      RTPINN_DOUBLE("layer_width", train.layer_width),
      Key{"seed",
          [](ExperimentConfig& c, const std::string& v) {
            const long long s = to_integer("seed", v);
            if (s < 0) throw ConfigError("config: 'seed' must be non-negative");
            c.train.seed = static_cast<std::uint64_t>(s);
          },
          [](const ExperimentConfig& c) { return std::to_string(c.train.seed); }},
      RTPINN_DOUBLE("adam_lr", adam.lr),
      RTPINN_DOUBLE("adam_beta1", adam.beta1),
      RTPINN_DOUBLE("adam_beta2", adam.beta2),
      RTPINN_DOUBLE("adam_eps", adam.eps),
      RTPINN_DOUBLE("adam_decay_factor", adam.decay_factor),
      RTPINN_INT("adam_decay_every", adam.decay_every),
      RTPINN_INT("lbfgs_memory", lbfgs.memory),
      RTPINN_DOUBLE("lbfgs_c1", lbfgs.c1),
      RTPINN_DOUBLE("lbfgs_shrink", lbfgs.shrink),
      RTPINN_INT("lbfgs_max_backtracks", lbfgs.max_backtracks),
      RTPINN_DOUBLE("lbfgs_fallback_lr", lbfgs.fallback_lr),
      Key{"lbfgs_scale_initial",
          [](ExperimentConfig& c, const std::string& v) { c.lbfgs.scale_initial = to_bool("lbfgs_scale_initial", v); },
          [](const ExperimentConfig& c) { return std::string(c.lbfgs.scale_initial ? "true" : "false"); }},
      RTPINN_INT("max_iter_adam", stop.max_iter_adam),
      RTPINN_DOUBLE("adam_loss_tol", stop.adam_loss_tol),
      RTPINN_INT("max_iter_lbfgs", stop.max_iter_lbfgs),
      RTPINN_DOUBLE("lbfgs_grad_tol", stop.lbfgs_grad_tol),
      RTPINN_DOUBLE("bw_left", boundary_weights[0]),
      RTPINN_DOUBLE("bw_right", boundary_weights[1]),
      RTPINN_DOUBLE("bw_bottom", boundary_weights[2]),
      RTPINN_DOUBLE("bw_top", boundary_weights[3]),
      Key{"mean_penalty",
          [](ExperimentConfig& c, const std::string& v) { c.mean_penalty = to_tristate("mean_penalty", v); },
          [](const ExperimentConfig& c) { return tristate(c.mean_penalty); }},
      Key{"use_corrector",
          [](ExperimentConfig& c, const std::string& v) { c.use_corrector = to_tristate("use_corrector", v); },
          [](const ExperimentConfig& c) { return tristate(c.use_corrector); }},
      RTPINN_DOUBLE("corrector_threshold", corrector_threshold),
      RTPINN_INT("ref_nx", ref_nx),
      RTPINN_INT("ref_ny", ref_ny),
      RTPINN_INT("ref_nv", ref_nv),
      RTPINN_INT("ref_nx_layer", ref_nx_layer),
      RTPINN_DOUBLE("ref_layer_width", ref_layer_width),
      RTPINN_INT("error_every", error_every),
      RTPINN_DOUBLE("hg_h", hg_h),
      RTPINN_DOUBLE("hetero_a", hetero_a),
      RTPINN_DOUBLE("hetero_b", hetero_b),
      RTPINN_DOUBLE("nl_a", nonlinear.a),
      RTPINN_DOUBLE("nl_c", nonlinear.c),
      RTPINN_DOUBLE("nl_sigma", nonlinear.sigma),
      RTPINN_DOUBLE("nl_t_left", nonlinear.t_left),
      RTPINN_DOUBLE("nl_t_right", nonlinear.t_right),
      RTPINN_DOUBLE("hs_z", hs_z),
      RTPINN_INT("hs_nz", hs_nz),
      RTPINN_INT("hs_nv", hs_nv),
      RTPINN_INT("hs_nb", hs_nb),
      RTPINN_INT("hs_ny", hs_ny),
      RTPINN_INT("hs_hidden_layers", hs_hidden_layers),
      RTPINN_INT("hs_width", hs_width),
      RTPINN_INT("hs_max_iter_adam", hs_stop.max_iter_adam),
      RTPINN_DOUBLE("hs_adam_loss_tol", hs_stop.adam_loss_tol),
      RTPINN_INT("hs_max_iter_lbfgs", hs_stop.max_iter_lbfgs),
      RTPINN_DOUBLE("hs_lbfgs_grad_tol", hs_stop.lbfgs_grad_tol),
      Key{"corrector", [](ExperimentConfig& c, const std::string& v) { c.corrector = v; },
          [](const ExperimentConfig& c) { return c.corrector; }},
      Key{"output_dir", [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
          [](const ExperimentConfig& c) { return c.output_dir; }},
      RTPINN_INT("jobs", jobs),
  };
  return k;
}

#undef RTPINN_DOUBLE
#undef RTPINN_INT

}  // namespace

// ---------------------------------------------------------------------------
// Configuration.

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids = {"toy-vanilla", "toy-mm", "ex5.1", "ex5.2", "ex5.3",
                                               "ex5.4",       "ex5.5",  "ex5.6", "ex5.7", "ex5.8",
                                               "ex5.9",       "pitfall-weights", "pitfall-mesh"};
  return ids;
}

bool is_long_experiment(const std::string& id) { return id == "ex5.7" || id == "ex5.9"; }

int ExperimentConfig::dim() const { return (id == "ex5.2" || id == "ex5.4" || id == "ex5.7" || id == "ex5.9") ? 2 : 1; }

ExperimentConfig default_config(const std::string& id) {
  const auto& ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) throw ConfigError("config: unknown experiment id '" + id + "'");
  ExperimentConfig c;
  c.id = id;
  // Two-phase stopping parameters for 1D problems.
  c.stop.max_iter_adam = 12000;
  c.stop.adam_loss_tol = 0.005;
  c.stop.max_iter_lbfgs = 10000;
  c.stop.lbfgs_grad_tol = 1e-6;
  c.hs_stop = c.stop;
  if (c.dim() == 2) {
    c.width = 30;
    c.train.nx = c.train.ny = c.train.nv = c.train.nb = 40;
    c.ref_nx = c.ref_ny = 60;
    c.ref_nv = 40;
    c.stop.max_iter_adam = 20000;
    c.stop.adam_loss_tol = 0.01;
  }
  if (id == "ex5.1" || id == "ex5.2" || id == "ex5.4" || id == "ex5.8") c.epsilon = 1.0;
  if (id == "ex5.3") {
    c.epsilon = 1.0;  // unused: eps(x) comes from the scattering profile
    c.adam.decay_factor = 0.95;
    c.adam.decay_every = 2000;
  }
  if (id == "ex5.5" || id == "ex5.7") c.epsilon = 1.0;
  if (id == "ex5.9") {
    c.width = 50;
    c.hs_ny = 21;
  }
  if (id == "pitfall-weights") c.boundary_weights[0] = 1e3;  // 1/eps at the default eps
  if (id == "pitfall-mesh") {
    c.train.nx_layer = 150;
    c.train.nx = 50;
  }
  if (is_bl_id(id)) c.ref_nx_layer = -1;
  return c;
}

void ExperimentConfig::validate() const {
  default_config(id);
  if (!(epsilon > 0.0)) throw ConfigError("config: epsilon must be positive");
  if (hidden_layers < 1 || width < 1) throw ConfigError("config: network sizes must be positive");
  if (hs_hidden_layers < 1 || hs_width < 1) throw ConfigError("config: half-space network sizes must be positive");
  if (ref_nx < 2 || ref_ny < 2 || ref_nv < 2) throw ConfigError("config: reference grid counts must be at least 2");
  if (ref_nx_layer < -1) throw ConfigError("config: ref_nx_layer must be -1 (auto), 0 or positive");
  if (ref_layer_width < 0.0) throw ConfigError("config: ref_layer_width must be non-negative");
  if (error_every < 1) throw ConfigError("config: error_every must be positive");
  if (hs_nz < 2 || hs_nv < 2 || hs_nb < 1 || hs_ny < 2 || !(hs_z > 0.0))
    throw ConfigError("config: half-space counts must be positive");
  if (!(hg_h >= 0.0 && hg_h < 1.0)) throw ConfigError("config: hg_h must lie in [0, 1)");
  if (!(hetero_a > 0.0) || !(hetero_b >= 0.0)) throw ConfigError("config: hetero_a > 0 and hetero_b >= 0 required");
  if (!(nonlinear.a > 0.0) || !(nonlinear.c > 0.0) || !(nonlinear.sigma > 0.0))
    throw ConfigError("config: nonlinear constants must be positive");
  if (!(corrector_threshold > 0.0)) throw ConfigError("config: corrector_threshold must be positive");
  if (jobs < 1) throw ConfigError("config: jobs must be positive");
  for (double w : boundary_weights)
    if (!(w > 0.0)) throw ConfigError("config: boundary weights must be positive");
  try {
    TrainingConfig t = train;
    if (t.nx_layer > 0 && !(t.layer_width > 0.0)) t.layer_width = epsilon;
    t.validate();
    adam.validate();
    lbfgs.validate();
    stop.validate();
    hs_stop.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::map<std::string, std::string> parse_key_values(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, value).second) throw ConfigError("config: duplicate key '" + key + "'");
  }
  const auto s = kv.find("schema");
  if (s == kv.end()) throw ConfigError("config: missing 'schema'");
  if (to_int("schema", s->second) != kConfigSchema)
    throw ConfigError("config: unsupported schema " + s->second + " (expected " + std::to_string(kConfigSchema) + ")");
  kv.erase(s);
  return kv;
}

ExperimentConfig parse_config(std::istream& is) {
  auto kv = parse_key_values(is);
  const auto idit = kv.find("id");
  if (idit == kv.end()) throw ConfigError("config: missing 'id'");
  ExperimentConfig c = default_config(idit->second);
  kv.erase(idit);
  // Apply epsilon first so that epsilon-dependent defaults follow it.
  if (auto e = kv.find("epsilon"); e != kv.end()) {
    c.epsilon = to_double("epsilon", e->second);
    if (c.id == "pitfall-weights" && !kv.count("bw_left") && c.epsilon > 0.0) c.boundary_weights[0] = 1.0 / c.epsilon;
    kv.erase(e);
  }
  for (const auto& [key, value] : kv) {
    const auto& ks = keys();
    const auto it = std::find_if(ks.begin(), ks.end(), [&](const Key& k) { return k.name == key; });
    if (it == ks.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->set(c, value);
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  return parse_config(is);
}

std::string config_snapshot(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "schema = " << kConfigSchema << "\nid = " << cfg.id << "\n";
  for (const auto& k : keys()) os << k.name << " = " << k.get(cfg) << "\n";
  return os.str();
}

std::string output_root() {
  const char* env = std::getenv("RTPINN_OUTPUT_ROOT");
  return env && *env ? std::string(env) : std::string("results");
}

// ---------------------------------------------------------------------------
// Problems.

ProblemSpec make_problem(const ExperimentConfig& cfg) {
  cfg.validate();
  ProblemSpec s;
  s.dim = cfg.dim();
  s.epsilon = cfg.epsilon;
  s.boundary_weights = cfg.boundary_weights;
  const std::string& id = cfg.id;
  if (s.dim == 2) {
    s.x0 = s.y0 = -1.0;
    s.x1 = s.y1 = 1.0;
  }
  if (is_toy_id(id)) {
    const double eps = cfg.epsilon;
    s.source = [eps](double, double, double v) { return -v / eps; };
    s.inflow = [](Face f, double, double, double) { return f == Face::kLeft ? 1.0 : 0.0; };
  } else if (id == "ex5.1" || id == "ex5.8") {
    s.inflow = [](Face f, double, double, double) { return f == Face::kLeft ? 1.0 : 0.0; };
  } else if (id == "ex5.2") {
    const double eps = cfg.epsilon;
    s.source = [eps](double x, double y, double a) { return (-std::cos(a) - std::sin(a)) * std::exp(-x - y) / eps; };
    s.inflow = [](Face, double x, double y, double) { return std::exp(-x - y); };
  } else if (id == "ex5.3") {
    const double a = cfg.hetero_a, b = cfg.hetero_b;
    s.epsilon_x = [a, b](double x) {
      const double e = std::exp(-a * (x - 0.5));
      return (1.0 + e) / (b + 1.0 + e);
    };
    s.epsilon_dx = [a, b](double x) {
      const double e = std::exp(-a * (x - 0.5));
      return -a * b * e / ((b + 1.0 + e) * (b + 1.0 + e));
    };
    s.epsilon = s.epsilon_x(0.5);
    s.inflow = [](Face f, double, double, double) { return f == Face::kLeft ? 5.0 : 0.0; };
  } else if (id == "ex5.4") {
    s.kernel.kind = KernelKind::kHenyeyGreenstein;
    s.kernel.h = cfg.hg_h;
    s.inflow = [](Face f, double, double y, double) { return f == Face::kLeft ? 1.0 - y * y : 0.0; };
  } else if (id == "ex5.9" || id == "ex5.7") {
    s.inflow = [](Face f, double, double y, double a) { return f == Face::kLeft ? (1.0 - y * y) * a : 0.0; };
  } else {  // ex5.5, ex5.6 and the pitfall runs
    s.inflow = [](Face f, double, double, double v) { return f == Face::kLeft ? 5.0 * std::sin(v) : 0.0; };
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Metrics and grids.

double relative_l2(const Field& pred, const Field& ref, bool take_sqrt) {
  if (pred.dim != ref.dim || pred.values.size() != ref.values.size() || pred.nx() != ref.nx() ||
      pred.ny() != ref.ny() || pred.nv() != ref.nv())
    throw std::invalid_argument("relative_l2: grids differ");
  auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(b[i]))) return false;
    return true;
  };
  if (!same(pred.x, ref.x) || (ref.dim == 2 && !same(pred.y, ref.y)) || !same(pred.v.nodes, ref.v.nodes))
    throw std::invalid_argument("relative_l2: grids differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.nx(); ++i)
    for (std::size_t k = 0; k < ref.ny(); ++k) {
      const double ws = ref.xw[i] * (ref.dim == 2 ? ref.yw[k] : 1.0);
      for (std::size_t j = 0; j < ref.nv(); ++j) {
        const double w = ws * (ref.kinetic() ? ref.v.weights[j] : 1.0);
        const double r = ref.at(i, k, j), d = pred.at(i, k, j) - r;
        num += w * d * d;
        den += w * r * r;
      }
    }
  if (!(den > 0.0)) throw std::invalid_argument("relative_l2: reference has zero norm");
  const double q = num / den;
  return take_sqrt ? std::sqrt(q) : q;
}

namespace {

bool corrector_on(const ExperimentConfig& cfg) {
  if (cfg.id != "ex5.6" && cfg.id != "ex5.9") return false;
  return cfg.use_corrector < 0 ? cfg.epsilon <= cfg.corrector_threshold : cfg.use_corrector == 1;
}

bool mean_penalty_on(const ExperimentConfig& cfg) {
  if (cfg.mean_penalty >= 0) return cfg.mean_penalty == 1;
  return !(is_toy_id(cfg.id) || cfg.id == "pitfall-weights" || cfg.id == "pitfall-mesh");
}

Mesh reference_mesh(const ExperimentConfig& cfg) {
  if (cfg.dim() == 2) return uniform_mesh_2d(-1.0, 1.0, -1.0, 1.0, cfg.ref_nx, cfg.ref_ny, cfg.ref_nv);
  int layer = cfg.ref_nx_layer;
  if (layer < 0) layer = cfg.epsilon < 0.1 ? 300 : 0;
  if (layer == 0) return uniform_mesh_1d(0.0, 1.0, cfg.ref_nx, cfg.ref_nv);
  const double width = cfg.ref_layer_width > 0.0 ? cfg.ref_layer_width : std::min(0.5, 10.0 * cfg.epsilon);
  return split_mesh_1d(0.0, 1.0, width, layer, cfg.ref_nx, cfg.ref_nv);
}

Field empty_field(const Mesh& m) {
  Field f;
  f.dim = m.dim;
  f.x = m.x;
  f.xw = trapezoid_weights(m.x);
  if (m.dim == 2) {
    f.y = m.y;
    f.yw = trapezoid_weights(m.y);
  }
  f.v = m.v;
  f.values.assign(f.ns() * f.nv(), 0.0);
  return f;
}

// Space points (dim x ns) and phase points ((dim + 1) x ns nv) of a field.
void field_points(const Field& f, Eigen::MatrixXd& space, Eigen::MatrixXd& phase) {
  const auto ns = static_cast<Eigen::Index>(f.ns()), nv = static_cast<Eigen::Index>(f.nv());
  space.resize(f.dim, ns);
  phase.resize(f.dim + 1, ns * nv);
  for (std::size_t i = 0; i < f.nx(); ++i)
    for (std::size_t k = 0; k < f.ny(); ++k) {
      const auto s = static_cast<Eigen::Index>(i * f.ny() + k);
      space(0, s) = f.x[i];
      if (f.dim == 2) space(1, s) = f.y[k];
      for (Eigen::Index j = 0; j < nv; ++j) {
        phase.block(0, s * nv + j, f.dim, 1) = space.col(s);
        phase(f.dim, s * nv + j) = f.v.nodes[static_cast<std::size_t>(j)];
      }
    }
}

HalfSpaceTraining halfspace_training(const ExperimentConfig& cfg) {
  HalfSpaceTraining t;
  t.hidden_layers = cfg.hs_hidden_layers;
  t.width = cfg.hs_width;
  t.adam = cfg.adam;
  t.adam.decay_factor = 1.0;
  t.adam.decay_every = 0;
  t.lbfgs = cfg.lbfgs;
  t.stop = cfg.hs_stop;
  t.seed = cfg.train.seed;
  return t;
}

HalfSpaceSpec halfspace_spec(const ExperimentConfig& cfg, int dim) {
  HalfSpaceSpec s;
  s.dim = dim;
  s.Z = cfg.hs_z;
  s.nz = cfg.hs_nz;
  s.nv = cfg.hs_nv;
  s.nb = cfg.hs_nb;
  if (dim == 1) s.inflow = [](double v) { return 5.0 * std::sin(v); };
  return s;
}

std::vector<double> halfspace_y_grid(const ExperimentConfig& cfg) {
  std::vector<double> y(cfg.hs_ny);
  for (int j = 0; j < cfg.hs_ny; ++j) y[j] = -1.0 + 2.0 * j / (cfg.hs_ny - 1);
  return y;
}

std::string file_stem(const ExperimentConfig& cfg) { return cfg.id + "_s" + std::to_string(cfg.train.seed); }

bool numerical_failure(const std::exception& e) {
  return dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const FdmError*>(&e) ||
         (dynamic_cast<const std::runtime_error*>(&e) && !dynamic_cast<const ConfigError*>(&e) &&
          !dynamic_cast<const std::invalid_argument*>(&e));
}

template <class Fn>
auto phase(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const ExperimentError&) {
    throw;
  } catch (const std::exception& e) {
    throw ExperimentError(name, e.what(), numerical_failure(e));
  }
}

}  // namespace

Field reference_field(const ExperimentConfig& cfg) {
  cfg.validate();
  const ProblemSpec spec = make_problem(cfg);
  const Mesh mesh = reference_mesh(cfg);
  if (is_halfspace_id(cfg.id)) throw ConfigError("reference_field: half-space experiments have no grid reference");
  if (is_toy_id(cfg.id) || cfg.id == "ex5.2") {
    Field f = empty_field(mesh);
    for (std::size_t i = 0; i < f.nx(); ++i)
      for (std::size_t k = 0; k < f.ny(); ++k)
        for (std::size_t j = 0; j < f.nv(); ++j)
          f.at(i, k, j) = cfg.id == "ex5.2" ? std::exp(-f.x[i] - f.y[k]) : 1.0 - f.x[i];
    return f;
  }
  if (cfg.id == "ex5.8") {
    NonlinearFdmSpec n;
    n.epsilon = cfg.epsilon;
    n.a = cfg.nonlinear.a;
    n.c = cfg.nonlinear.c;
    n.sigma = cfg.nonlinear.sigma;
    n.t_left = cfg.nonlinear.t_left;
    n.t_right = cfg.nonlinear.t_right;
    return fdm_nonlinear_1d(n, mesh).intensity;
  }
  return fdm_rte(spec, mesh);
}

std::shared_ptr<GammaCorrector> build_corrector(const ExperimentConfig& cfg, const RunOptions& opt) {
  const int dim = cfg.dim();
  std::shared_ptr<GammaCorrector> c;
  if (!cfg.corrector.empty()) {
    auto loaded = load_corrector(cfg.corrector);
    if (loaded->dim() != dim) throw ConfigError("corrector checkpoint has the wrong dimension");
    if (loaded->epsilon() == cfg.epsilon) return loaded;
    if (dim == 1) return std::make_shared<GammaCorrector>(loaded->solutions().front(), cfg.epsilon);
    return std::make_shared<GammaCorrector>(loaded->solutions(), loaded->y_grid(), cfg.epsilon);
  }
  const HalfSpaceTraining t = halfspace_training(cfg);
  if (dim == 1) {
    c = std::make_shared<GammaCorrector>(solve_halfspace(halfspace_spec(cfg, 1), t), cfg.epsilon);
  } else {
    const auto y = halfspace_y_grid(cfg);
    auto sols = solve_halfspace_2d(
        halfspace_spec(cfg, 2), [](double yy, double a) { return (1.0 - yy * yy) * a; }, y, t, cfg.jobs);
    c = std::make_shared<GammaCorrector>(std::move(sols), y, cfg.epsilon);
  }
  if (!opt.output_root.empty()) {
    std::filesystem::create_directories(opt.output_root);
    save_corrector((std::filesystem::path(opt.output_root) / (file_stem(cfg) + "_corrector.txt")).string(), *c);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Experiments.

namespace {

ResultRecord run_halfspace(const ExperimentConfig& cfg, const RunOptions& opt, ResultRecord rec) {
  HalfSpaceTraining t = halfspace_training(cfg);
  t.hooks = opt.hooks;
  if (cfg.id == "ex5.5") {
    const HalfSpaceSpec s = halfspace_spec(cfg, 1);
    const HalfSpaceSolution sol = phase("train", [&] { return solve_halfspace(s, t); });
    const HFunctionTable h = phase("reference", [] { return chandrasekhar_h_1d(); });
    const double exact = f_bl_infinity_1d(s.inflow, h);
    rec.history = sol.opt.history;
    rec.final_loss = sol.final_loss;
    rec.status = to_string(sol.opt.status);
    rec.metrics["f_inf"] = sol.f_inf;
    rec.metrics["f_inf_exact"] = exact;
    rec.metrics["f_inf_error"] = std::abs(sol.f_inf - exact);
    rec.metrics["max_flux"] = sol.max_flux();
    // Outgoing trace at the wall against the H-function reflection formula.
    const QuadratureRule r = gauss_legendre(40, -1.0, 0.0);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double ex = reflection_bc_1d(s.inflow, h, r.nodes[j]);
      num += r.weights[j] * std::pow(sol.value(0.0, r.nodes[j]) - ex, 2);
      den += r.weights[j] * ex * ex;
    }
    rec.metrics["reflection_rel_l2"] = std::sqrt(num / den);
    Mesh m = uniform_mesh_1d(0.0, s.Z, cfg.ref_nx, cfg.ref_nv);
    rec.prediction = empty_field(m);
    for (std::size_t i = 0; i < m.x.size(); ++i)
      for (std::size_t j = 0; j < m.v.size(); ++j) rec.prediction.at(i, 0, j) = sol.value(m.x[i], m.v.nodes[j]);
    if (!opt.output_root.empty()) {
      std::filesystem::create_directories(opt.output_root);
      save_corrector((std::filesystem::path(opt.output_root) / (file_stem(cfg) + "_corrector.txt")).string(),
                     GammaCorrector(sol, 1.0));
    }
    return rec;
  }
  // ex5.7: one solve per y node.
  ExperimentConfig c = cfg;
  auto corr = phase("train", [&] { return build_corrector(c, opt); });
  const HFunctionTable h = phase("reference", [] { return chandrasekhar_h_2d(); });
  double worst = 0.0, worst_flux = 0.0;
  for (std::size_t j = 0; j < corr->y_grid().size(); ++j) {
    const double y = corr->y_grid()[j];
    const double exact = f_bl_infinity_2d([y](double a) { return (1.0 - y * y) * a; }, h);
    worst = std::max(worst, std::abs(corr->solutions()[j].f_inf - exact));
    worst_flux = std::max(worst_flux, corr->solutions()[j].max_flux());
  }
  rec.metrics["f_inf_max_error"] = worst;
  rec.metrics["max_flux"] = worst_flux;
  rec.metrics["f_inf_y0"] = corr->f_inf(0.0);
  rec.metrics["f_inf_y0_exact"] = f_bl_infinity_2d([](double a) { return a; }, h);
  rec.status = "trained";
  return rec;
}

}  // namespace

ResultRecord run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  cfg.validate();
  if (is_long_experiment(cfg.id) && !opt.allow_long)
    throw ConfigError("experiment " + cfg.id + " is long-running; pass --long to run it");
  if (cfg.train.nx_layer > 0 && !(cfg.train.layer_width > 0.0)) cfg.train.layer_width = cfg.epsilon;

  ResultRecord rec;
  rec.id = cfg.id;
  rec.seed = cfg.train.seed;
  rec.config = config_snapshot(cfg);
  auto finish = [&](ResultRecord r) {
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
  };
  if (is_halfspace_id(cfg.id)) return finish(run_halfspace(cfg, opt, std::move(rec)));

  const ProblemSpec spec = phase("setup", [&] { return make_problem(cfg); });
  const TrainingSet ts = phase("setup", [&] { return make_training_set(spec, cfg.train); });
  const Field ref = phase("reference", [&] { return reference_field(cfg); });
  std::shared_ptr<GammaCorrector> gamma;
  if (corrector_on(cfg)) gamma = phase("corrector", [&] { return build_corrector(cfg, opt); });

  const int dim = spec.dim;
  const bool vanilla = cfg.id == "toy-vanilla";
  const bool nonlinear = cfg.id == "ex5.8";
  ParamLayout layout;
  int f_id = -1, rho_id = -1, g_id = -1, t_id = -1;
  if (vanilla) {
    f_id = layout.add(make_mlp_spec(dim + 1, cfg.hidden_layers, cfg.width, 1, OutputActivation::kIdentity));
  } else {
    rho_id = layout.add(make_mlp_spec(dim, cfg.hidden_layers, cfg.width, 1, OutputActivation::kSoftplus));
    g_id = layout.add(make_mlp_spec(dim + 1, cfg.hidden_layers, cfg.width, 1, OutputActivation::kIdentity));
    if (nonlinear)
      t_id = layout.add(make_mlp_spec(dim, cfg.hidden_layers, cfg.width, 1, OutputActivation::kSoftplus));
  }
  const bool penalty = mean_penalty_on(cfg);
  BoundaryLayerOptions blo;
  blo.mean_penalty = penalty;

  LossModel model(layout, [&](LossTape& tape, std::span<const double> theta) {
    if (vanilla) return vanilla_loss(spec, ts, *layout.network(f_id, theta), tape);
    const auto rho = layout.network(rho_id, theta);
    const auto g = layout.network(g_id, theta);
    if (nonlinear) return nonlinear_loss(spec, ts, *rho, *g, *layout.network(t_id, theta), cfg.nonlinear, tape);
    if (spec.heterogeneous()) return hetero_eps_loss(spec, ts, *rho, *g, tape);
    if (gamma)
      return dim == 1 ? bl_corrected_loss_1d(spec, ts, *rho, *g, *gamma, tape, blo)
                      : bl_corrected_loss_2d(spec, ts, *rho, *g, *gamma, tape, blo);
    return macro_micro_loss(spec, ts, *rho, *g, tape, penalty);
  });

  // Prediction on the reference grid: rho + eps(x) g [+ Gamma], or f.
  Eigen::MatrixXd space, phase_pts;
  field_points(ref, space, phase_pts);
  Eigen::VectorXd gamma_vals, eps_vals(space.cols());
  if (gamma) gamma_vals = gamma->values(phase_pts);
  for (Eigen::Index s = 0; s < space.cols(); ++s) eps_vals[s] = spec.eps_at(space(0, s));
  auto predict = [&](std::span<const double> theta) {
    Field p = ref;
    const std::size_t nv = ref.nv();
    if (vanilla) {
      const Eigen::VectorXd f = layout.network(f_id, theta)->values(phase_pts);
      std::copy(f.data(), f.data() + f.size(), p.values.begin());
      return p;
    }
    const Eigen::VectorXd r = layout.network(rho_id, theta)->values(space);
    const Eigen::VectorXd g = layout.network(g_id, theta)->values(phase_pts);
    for (Eigen::Index s = 0; s < space.cols(); ++s)
      for (std::size_t j = 0; j < nv; ++j) {
        const auto q = s * static_cast<Eigen::Index>(nv) + static_cast<Eigen::Index>(j);
        p.values[q] = r[s] + eps_vals[s] * g[q] + (gamma ? gamma_vals[q] : 0.0);
      }
    return p;
  };

  TrainHooks hooks = opt.hooks;
  hooks.error_every = cfg.error_every;
  hooks.error = [&](std::span<const double> theta) { return relative_l2(predict(theta), ref, false); };
  const OptResult res = phase("train", [&] {
    return two_phase_train(model.loss_grad(), layout.init(cfg.train.seed), cfg.adam, cfg.lbfgs, cfg.stop, hooks);
  });

  rec.history = res.history;
  rec.final_loss = model.breakdown(res.theta);
  rec.status = to_string(res.status);
  rec.prediction = predict(res.theta);
  rec.reference = ref;
  rec.metrics["final_loss"] = rec.final_loss.total;
  rec.metrics["rel_l2"] = relative_l2(rec.prediction, ref, false);
  rec.metrics["rel_l2_sqrt"] = relative_l2(rec.prediction, ref, true);
  rec.metrics["iterations"] = res.iterations;
  rec.metrics["grad_norm"] = res.grad_norm;
  if (gamma) rec.metrics["corrector_f_inf"] = gamma->f_inf(0.0);
  if (nonlinear) {
    NonlinearFdmSpec n;
    n.epsilon = cfg.epsilon;
    n.a = cfg.nonlinear.a;
    n.c = cfg.nonlinear.c;
    n.sigma = cfg.nonlinear.sigma;
    n.t_left = cfg.nonlinear.t_left;
    n.t_right = cfg.nonlinear.t_right;
    const Field tref = fdm_nonlinear_1d(n, reference_mesh(cfg)).temperature;
    Field tp = tref;
    const Eigen::VectorXd tv = layout.network(t_id, res.theta)->values(space);
    std::copy(tv.data(), tv.data() + tv.size(), tp.values.begin());
    rec.metrics["temperature_rel_l2_sqrt"] = relative_l2(tp, tref, true);
  }
  return finish(std::move(rec));
}

std::vector<ResultRecord> run_experiments(const std::vector<ExperimentConfig>& cfgs, int jobs, const RunOptions& opt) {
  std::vector<ResultRecord> out(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfgs.size();) {
      try {
        out[i] = run_experiment(cfgs[i], opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(cfgs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Output.

std::vector<std::string> emit_results(const ResultRecord& rec, const std::string& dir, bool csv, bool json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string stem = rec.id + "_s" + std::to_string(rec.seed);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(dir) / (stem + name)).string();
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    written.push_back(path);
    return os;
  };
  {
    auto os = open("_config.txt");
    os << rec.config;
  }
  if (csv) {
    {
      auto os = open("_history.csv");
      os << std::setprecision(17) << "iteration,phase,loss,rel_error\n";
      for (const auto& h : rec.history) {
        os << h.iteration << ',' << h.phase << ',' << h.loss << ',';
        if (!std::isnan(h.rel_error)) os << h.rel_error;
        os << '\n';
      }
    }
    if (!rec.prediction.values.empty()) {
      auto os = open("_prediction.csv");
      write_field_csv(os, rec.prediction);
    }
    if (!rec.reference.values.empty()) {
      auto os = open("_reference.csv");
      write_field_csv(os, rec.reference);
    }
  }
  if (json) {
    nlohmann::ordered_json j;
    j["id"] = rec.id;
    j["seed"] = rec.seed;
    j["status"] = rec.status;
    j["wall_seconds"] = rec.wall_seconds;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = stamp;
    j["final_loss"] = rec.final_loss.total;
    for (const auto& t : rec.final_loss.terms) j["loss_terms"][t.name] = t.value;
    for (const auto& [k, v] : rec.metrics) j["metrics"][k] = v;
    j["config"] = rec.config;
    auto os = open("_result.json");
    os << std::setw(2) << j << '\n';
  }
  for (const auto& path : written)
    if (!fs::exists(path)) throw std::runtime_error("failed to write " + path);
  return written;
}

// ---------------------------------------------------------------------------
// Stability sweep.

namespace {

// Random smooth perturbations: a(x) of rho and b(x, v) of g.
struct Perturbation {
  std::array<double, 3> ca{}, pa{};
  std::array<std::array<double, 2>, 3> cb{};
  double b_scale = 1.0;  // makes ||b|| equal ||a||
  double delta = 0.0;
};

template <class J>
J pert_a(const Perturbation& p, const J& x) {
  J s = x * 0.0;
  for (int k = 0; k < 3; ++k) s = s + p.ca[k] * sin(x * ((k + 1) * kPi * 0.5) + p.pa[k]);
  return s;
}

// Mean zero in v (Legendre P1, P2), as a micro part must be.
template <class J>
J pert_b(const Perturbation& p, const J& x, const J& v) {
  J s = x * 0.0;
  const J p1 = v, p2 = 1.5 * v * v - 0.5;
  for (int k = 0; k < 3; ++k) s = s + cos(x * (k * kPi * 0.5)) * (p.cb[k][0] * p1 + p.cb[k][1] * p2);
  return s * p.b_scale;
}

ProblemSpec toy_problem(double eps) {
  ProblemSpec s;
  s.epsilon = eps;
  s.source = [eps](double, double, double v) { return -v / eps; };
  s.inflow = [](Face f, double, double, double) { return f == Face::kLeft ? 1.0 : 0.0; };
  return s;
}

// ||f - f*||^2 with the training rules (velocity average).
template <class Fn>
double error_sq(const TrainingSet& ts, Fn&& diff) {
  double s = 0.0;
  for (std::size_t i = 0; i < ts.x_rule.size(); ++i)
    for (std::size_t j = 0; j < ts.v_rule.size(); ++j)
      s += ts.x_rule.weights[i] * ts.vel_avg_w[j] * std::pow(diff(ts.x_rule.nodes[i], ts.v_rule.nodes[j]), 2);
  return s;
}

}  // namespace

StabilityResult run_stability_sweep(const StabilityConfig& cfg) {
  if (cfg.epsilons.empty() || cfg.candidates < 1 || !(cfg.delta_min > 0.0) || !(cfg.delta_max >= cfg.delta_min))
    throw std::invalid_argument("stability: invalid configuration");
  for (double e : cfg.epsilons)
    if (!(e > 0.0)) throw std::invalid_argument("stability: epsilons must be positive");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ph(0.0, 2.0 * kPi), ld(std::log(cfg.delta_min),
                                                                              std::log(cfg.delta_max));
  std::vector<Perturbation> ps(cfg.candidates);
  for (auto& p : ps) {
    for (int k = 0; k < 3; ++k) p.ca[k] = u(rng) / (k + 1), p.pa[k] = ph(rng);
    for (auto& row : p.cb)
      for (double& c : row) c = u(rng);
    p.delta = std::exp(ld(rng));
    // Equal L2 norms of the macro and micro parts on a fine grid.
    const QuadratureRule xr = gauss_legendre(64, 0.0, 1.0), vr = gauss_legendre(32, -1.0, 1.0);
    double na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < xr.size(); ++i) {
      const Jet2<double> x = Jet2<double>::constant(xr.nodes[i], 0);
      na += xr.weights[i] * std::pow(pert_a(p, x).value, 2);
      for (std::size_t j = 0; j < vr.size(); ++j)
        nb += xr.weights[i] * 0.5 * vr.weights[j] * std::pow(pert_b(p, x, Jet2<double>::constant(vr.nodes[j], 0)).value, 2);
    }
    p.b_scale = std::sqrt(na / nb);
  }

  StabilityResult out;
  std::vector<std::vector<double>> mm(cfg.candidates), van(cfg.candidates);
  for (double eps : cfg.epsilons) {
    const ProblemSpec spec = toy_problem(eps);
    TrainingConfig tc;
    tc.nx = cfg.nx;
    tc.nv = cfg.nv;
    tc.nb = cfg.nb;
    tc.seed = cfg.seed;
    const TrainingSet ts = make_training_set(spec, tc);
    for (int c = 0; c < cfg.candidates; ++c) {
      const Perturbation& p = ps[c];
      const double d = p.delta;
      // Macro-micro: rho = 1 - x + d a(x), g = d b(x, v).
      const FunctionApproximant rho(1, [&](std::span<const Jet2<double>> in) { return 1.0 - in[0] + d * pert_a(p, in[0]); });
      const FunctionApproximant g(2, [&](std::span<const Jet2<double>> in) { return d * pert_b(p, in[0], in[1]); });
      LossTape t1;
      const double e_mm = macro_micro_loss(spec, ts, rho, g, t1, true).breakdown().total;
      const double n_mm = error_sq(ts, [&](double x, double v) {
        const Jet2<double> xj = Jet2<double>::constant(x, 0), vj = Jet2<double>::constant(v, 0);
        return d * (pert_a(p, xj).value + eps * pert_b(p, xj, vj).value);
      });
      mm[c].push_back(n_mm / e_mm);
      out.rows.push_back({"macro-micro", c, d, eps, n_mm, e_mm, n_mm / e_mm});

      // Vanilla: v-independent perturbation vanishing on the boundary;
      // candidate 0 is (1 - x)^2 itself.
      auto q = [&](const Jet2<double>& x) {
        if (c == 0) return -1.0 * x * (1.0 - x);
        return d * x * (1.0 - x) * (1.5 + pert_a(p, x));
      };
      const FunctionApproximant f(2, [&](std::span<const Jet2<double>> in) { return 1.0 - in[0] + q(in[0]); });
      LossTape t2;
      const double e_v = vanilla_loss(spec, ts, f, t2).breakdown().total;
      const double n_v = error_sq(ts, [&](double x, double) { return q(Jet2<double>::constant(x, 0)).value; });
      van[c].push_back(n_v / e_v);
      out.rows.push_back({"vanilla", c, c == 0 ? 1.0 : d, eps, n_v, e_v, n_v / e_v});
    }
  }
  const auto find_eps = [&](double e) {
    for (std::size_t i = 0; i < cfg.epsilons.size(); ++i)
      if (std::abs(cfg.epsilons[i] - e) <= 1e-12 * e) return static_cast<int>(i);
    return -1;
  };
  const int i1 = find_eps(1e-1), i3 = find_eps(1e-3);
  out.vanilla_growth = std::numeric_limits<double>::quiet_NaN();
  if (i1 >= 0 && i3 >= 0) out.vanilla_growth = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cfg.candidates; ++c) {
    const auto [lo, hi] = std::minmax_element(mm[c].begin(), mm[c].end());
    out.mm_spread = std::max(out.mm_spread, *hi / *lo);
    if (i1 >= 0 && i3 >= 0) out.vanilla_growth = std::min(out.vanilla_growth, van[c][i3] / van[c][i1]);
  }
  return out;
}

StabilityConfig stability_config_from(const std::map<std::string, std::string>& kv) {
  StabilityConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "epsilons") {
      c.epsilons.clear();
      std::istringstream is(v);
      std::string tok;
      while (std::getline(is, tok, ','))
        if (!trim(tok).empty()) c.epsilons.push_back(to_double(k, trim(tok)));
    } else if (k == "candidates") {
      c.candidates = to_int(k, v);
    } else if (k == "delta_min") {
      c.delta_min = to_double(k, v);
    } else if (k == "delta_max") {
      c.delta_max = to_double(k, v);
    } else if (k == "seed") {
      const long long s = to_integer(k, v);
      if (s < 0) throw ConfigError("config: 'seed' must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else if (k == "nx") {
      c.nx = to_int(k, v);
    } else if (k == "nv") {
      c.nv = to_int(k, v);
    } else if (k == "nb") {
      c.nb = to_int(k, v);
    } else if (k != "id" && k != "output_dir") {
      throw ConfigError("config: unknown stability key '" + k + "'");
    }
  }
  if (c.epsilons.empty() || c.candidates < 1 || c.nx < 2 || c.nv < 2 || c.nb < 1 || !(c.delta_min > 0.0) ||
      !(c.delta_max >= c.delta_min))
    throw ConfigError("config: invalid stability parameters");
  for (double e : c.epsilons)
    if (!(e > 0.0)) throw ConfigError("config: epsilons must be positive");
  return c;
}

void write_stability_csv(std::ostream& os, const StabilityResult& r) {
  os << std::setprecision(17) << "loss,candidate,delta,epsilon,error_sq,loss_value,ratio\n";
  for (const auto& row : r.rows)
    os << row.loss << ',' << row.candidate << ',' << row.delta << ',' << row.epsilon << ',' << row.error_sq << ','
       << row.loss_value << ',' << row.ratio << '\n';
}

}  // namespace rtpinn
