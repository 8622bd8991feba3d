#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtpinn/boundary_layer.hpp"
#include "rtpinn/fdm.hpp"
#include "rtpinn/losses.hpp"
#include "rtpinn/optim.hpp"
#include "rtpinn/problem.hpp"

namespace rtpinn {

inline constexpr int kConfigSchema = 1;

// Invalid or unreadable configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure inside one phase of an experiment. `numerical` separates
// divergence and non-convergence (CLI exit code 3) from other errors.
class ExperimentError : public std::runtime_error {
 public:
  ExperimentError(std::string phase, const std::string& what, bool numerical)
      : std::runtime_error(phase + ": " + what), phase_(std::move(phase)), numerical_(numerical) {}
  const std::string& phase() const { return phase_; }
  bool numerical() const { return numerical_; }

 private:
  std::string phase_;
  bool numerical_;
};

// Recognized ids:
//   toy-vanilla, toy-mm        toy problem with the vanilla / macro-micro loss
//   ex5.1 homogeneous 1D       ex5.2 2D analytic      ex5.3 heterogeneous 1D
//   ex5.4 2D Henyey-Greenstein ex5.5 1D half-space    ex5.6 1D boundary layer
//   ex5.7 2D half-space        ex5.8 nonlinear 1D     ex5.9 2D boundary layer
//   pitfall-weights, pitfall-mesh  boundary-layer problem without a corrector
const std::vector<std::string>& experiment_ids();
bool is_long_experiment(const std::string& id);

struct ExperimentConfig {
  std::string id = "toy-mm";
  double epsilon = 1e-3;
  int hidden_layers = 4;
  int width = 50;
  TrainingConfig train;
  AdamConfig adam;
  LbfgsConfig lbfgs;
  StopRule stop;
  std::array<double, 4> boundary_weights{1.0, 1.0, 1.0, 1.0};
  int mean_penalty = -1;  // -1: per experiment (off for the toy and pitfall systems)
  int use_corrector = -1;  // -1: when epsilon <= corrector_threshold
  double corrector_threshold = 1e-2;

  // Reference / test grid.
  int ref_nx = 200, ref_ny = 60, ref_nv = 80;
  int ref_nx_layer = 0;
  double ref_layer_width = 0.0;
  int error_every = 100;

  // Problem parameters.
  double hg_h = 0.5;
  double hetero_a = 10.0, hetero_b = 20.0;
  NonlinearConstants nonlinear;

  // Half-space solves (ex5.5, ex5.7 and the correctors of ex5.6, ex5.9).
  double hs_z = 10.0;
  int hs_nz = 400, hs_nv = 40, hs_nb = 60, hs_ny = 21;
  int hs_hidden_layers = 4, hs_width = 50;
  StopRule hs_stop;
  std::string corrector;  // checkpoint to load instead of training

  std::string output_dir;  // relative paths resolve against the output root
  int jobs = 1;

  void validate() const;
  int dim() const;
};

// Defaults for an id.
ExperimentConfig default_config(const std::string& id);

// Flat "key = value" text; '#' starts a comment; "schema" must equal
// kConfigSchema and "id" selects the defaults the other keys override.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);
// Every key, in a form parse_config reads back to the same config.
std::string config_snapshot(const ExperimentConfig& cfg);
// Raw key-value pairs (schema checked) for the non-experiment subcommands.
std::map<std::string, std::string> parse_key_values(std::istream& is);

ProblemSpec make_problem(const ExperimentConfig& cfg);

// sum (pred - ref)^2 w / sum ref^2 w over the ref grid, square-rooted when asked.
double relative_l2(const Field& pred, const Field& ref, bool take_sqrt = false);

struct ResultRecord {
  std::string id;
  std::uint64_t seed = 0;
  std::string config;  // snapshot
  std::vector<HistoryEntry> history;
  LossBreakdown final_loss;
  std::map<std::string, double> metrics;
  Field prediction;
  Field reference;  // empty values when the experiment has no grid reference
  std::string status;
  double wall_seconds = 0.0;
};

struct RunOptions {
  bool allow_long = false;
  std::string output_root;  // where trained correctors are written (empty: not written)
  TrainHooks hooks;         // forwarded to the optimizer (error monitor is set internally)
};

// Grid reference for an experiment (FDM, analytic or limit solution).
Field reference_field(const ExperimentConfig& cfg);
// The boundary-layer corrector for ex5.6 / ex5.9 (trained or loaded).
std::shared_ptr<GammaCorrector> build_corrector(const ExperimentConfig& cfg, const RunOptions& opt = {});

ResultRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});
// Independent experiments on up to `jobs` threads; results in input order.
std::vector<ResultRecord> run_experiments(const std::vector<ExperimentConfig>& cfgs, int jobs,
                                          const RunOptions& opt = {});

// Writes <id>_s<seed>_{history.csv,prediction.csv,reference.csv,config.txt,result.json}
// into dir (created when missing). Returns the written paths.
std::vector<std::string> emit_results(const ResultRecord& rec, const std::string& dir, bool csv = true,
                                      bool json = true);

// Output root from RTPINN_OUTPUT_ROOT, "results" when unset.
std::string output_root();

// Ratios ||f - f*||^2 / E(f) for manufactured perturbations of the toy solution.
struct StabilityConfig {
  std::vector<double> epsilons{1.0, 1e-1, 1e-2, 1e-3};
  int candidates = 50;
  double delta_min = 1e-3, delta_max = 1e-1;
  std::uint64_t seed = 1;
  int nx = 80, nv = 60, nb = 60;
};

struct StabilityRow {
  std::string loss;  // "macro-micro" or "vanilla"
  int candidate = 0;
  double delta = 0.0;
  double epsilon = 0.0;
  double error_sq = 0.0;
  double loss_value = 0.0;
  double ratio = 0.0;
};

struct StabilityResult {
  std::vector<StabilityRow> rows;
  double mm_spread = 0.0;       // max over candidates of max_eps ratio / min_eps ratio
  double vanilla_growth = 0.0;  // min over candidates of ratio(1e-3) / ratio(1e-1)
};

StabilityResult run_stability_sweep(const StabilityConfig& cfg);
StabilityConfig stability_config_from(const std::map<std::string, std::string>& kv);
void write_stability_csv(std::ostream& os, const StabilityResult& r);

}  // namespace rtpinn
