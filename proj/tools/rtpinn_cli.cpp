#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rtpinn/boundary_layer.hpp"
#include "rtpinn/experiments.hpp"
#include "rtpinn/fdm.hpp"

namespace fs = std::filesystem;
using namespace rtpinn;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumerical = 3;

std::string result_dir(const ExperimentConfig& cfg) {
  return (fs::path(output_root()) / (cfg.output_dir.empty() ? cfg.id : cfg.output_dir)).string();
}

TrainHooks progress(bool quiet) {
  TrainHooks h;
  if (!quiet)
    h.on_step = [](const HistoryEntry& e) {
      if (e.iteration % 500 == 0) std::fprintf(stderr, "  %s %6d  loss %.3e\n", e.phase.c_str(), e.iteration, e.loss);
    };
  return h;
}

void print_metrics(const ResultRecord& r) {
  std::printf("%s seed %llu: %s in %.1f s\n", r.id.c_str(), static_cast<unsigned long long>(r.seed), r.status.c_str(),
              r.wall_seconds);
  for (const auto& [k, v] : r.metrics) std::printf("  %-26s %.6g\n", k.c_str(), v);
}

int train(const std::vector<std::string>& paths, int jobs, bool allow_long, bool quiet) {
  std::vector<ExperimentConfig> cfgs;
  for (const auto& p : paths) cfgs.push_back(load_config(p));
  RunOptions opt;
  opt.allow_long = allow_long;
  opt.output_root = output_root();
  opt.hooks = progress(quiet || jobs > 1);
  const auto records = run_experiments(cfgs, jobs, opt);
  for (std::size_t i = 0; i < records.size(); ++i) {
    print_metrics(records[i]);
    for (const auto& f : emit_results(records[i], result_dir(cfgs[i]))) std::printf("  wrote %s\n", f.c_str());
  }
  return kOk;
}

int fdm(const std::string& path, bool binary) {
  const ExperimentConfig cfg = load_config(path);
  const Field f = reference_field(cfg);
  const std::string dir = result_dir(cfg);
  fs::create_directories(dir);
  const std::string out =
      (fs::path(dir) / (cfg.id + "_s" + std::to_string(cfg.train.seed) + "_fdm" + (binary ? ".bin" : ".csv"))).string();
  save_field(out, f);
  std::printf("%s reference: %zu spatial nodes x %zu velocities\n  wrote %s\n", cfg.id.c_str(), f.ns(), f.nv(),
              out.c_str());
  return kOk;
}

int hfun(int dim, int n) {
  const HFunctionTable h = dim == 1 ? chandrasekhar_h_1d(n) : chandrasekhar_h_2d(n);
  const fs::path dir = output_root();
  fs::create_directories(dir);
  const std::string out = (dir / ("hfunction_" + std::to_string(dim) + "d.csv")).string();
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  write_hfunction_csv(os, h);
  std::printf("H-function (%dD, %d nodes): residual %.3e after %d iterations\n", dim, n, h.residual, h.iterations);
  if (dim == 1)
    std::printf("  far field for 5 sin v: %.6f\n", f_bl_infinity_1d([](double v) { return 5.0 * std::sin(v); }, h));
  else
    std::printf("  far field for alpha at y = 0: %.6f\n", f_bl_infinity_2d([](double a) { return a; }, h));
  std::printf("  wrote %s\n", out.c_str());
  return kOk;
}

int halfspace(const std::string& path, bool allow_long, bool quiet) {
  const ExperimentConfig cfg = load_config(path);
  if (cfg.id != "ex5.5" && cfg.id != "ex5.7") throw ConfigError("halfspace: id must be ex5.5 or ex5.7");
  RunOptions opt;
  opt.allow_long = allow_long;
  opt.output_root = result_dir(cfg);
  opt.hooks = progress(quiet);
  const ResultRecord r = run_experiment(cfg, opt);
  print_metrics(r);
  for (const auto& f : emit_results(r, result_dir(cfg))) std::printf("  wrote %s\n", f.c_str());
  return kOk;
}

int stability(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path);
  const auto kv = parse_key_values(is);
  const StabilityConfig cfg = stability_config_from(kv);
  const StabilityResult r = run_stability_sweep(cfg);
  const fs::path dir = fs::path(output_root()) / (kv.count("output_dir") ? kv.at("output_dir") : "stability");
  fs::create_directories(dir);
  const std::string out = (dir / ("stability_s" + std::to_string(cfg.seed) + ".csv")).string();
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  write_stability_csv(os, r);
  std::printf("macro-micro ratio spread over epsilon: %.4g\nvanilla ratio growth 1e-1 -> 1e-3: %.4g\n  wrote %s\n",
              r.mm_spread, r.vanilla_growth, out.c_str());
  return kOk;
}

int compare(const std::string& pred, const std::string& ref) {
  Field p, r;
  try {
    p = load_field(pred);
    r = load_field(ref);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  double rel = 0.0, rel_sqrt = 0.0;
  try {
    rel = relative_l2(p, r, false);
    rel_sqrt = relative_l2(p, r, true);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("compare: ") + e.what());
  }
  std::printf("relative_l2 %.10e\nrelative_l2_sqrt %.10e\n", rel, rel_sqrt);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural and reference solvers for the steady radiative transfer equation.\n"
               "Outputs go under $RTPINN_OUTPUT_ROOT (default ./results)."};
  app.require_subcommand(1);
  int jobs = 1;
  bool allow_long = false, quiet = false;
  app.add_option("--jobs", jobs, "Independent experiments (or half-space solves) run concurrently")
      ->check(CLI::PositiveNumber);
  app.add_flag("--long", allow_long, "Allow the long-running 2D boundary-layer experiments");
  app.add_flag("--quiet", quiet, "No optimizer progress on stderr");

  std::vector<std::string> train_cfgs;
  auto* c_train = app.add_subcommand("train", "Train one or more experiments");
  c_train->add_option("config", train_cfgs, "Experiment config file(s)")->required()->check(CLI::ExistingFile);

  std::string fdm_cfg;
  bool binary = false;
  auto* c_fdm = app.add_subcommand("fdm", "Compute the grid reference of an experiment");
  c_fdm->add_option("config", fdm_cfg, "Experiment config file")->required()->check(CLI::ExistingFile);
  c_fdm->add_flag("--binary", binary, "Write the field in binary form");

  int dim = 1, n = 128;
  auto* c_hfun = app.add_subcommand("hfun", "Tabulate the Chandrasekhar H-function");
  c_hfun->add_option("--dim", dim, "Dimension")->required()->check(CLI::IsMember({1, 2}));
  c_hfun->add_option("--nodes", n, "Quadrature nodes")->check(CLI::Range(4, 4096));

  std::string hs_cfg;
  auto* c_hs = app.add_subcommand("halfspace", "Train a half-space (boundary-layer) solution");
  c_hs->add_option("config", hs_cfg, "Experiment config file")->required()->check(CLI::ExistingFile);

  std::string st_cfg;
  auto* c_st = app.add_subcommand("stability", "Loss/error ratio sweep over epsilon");
  c_st->add_option("config", st_cfg, "Stability config file")->required()->check(CLI::ExistingFile);

  std::string cmp_pred, cmp_ref;
  auto* c_cmp = app.add_subcommand("compare", "Relative L2 error between two saved fields");
  c_cmp->add_option("pred", cmp_pred, "Predicted field (.csv or .bin)")->required()->check(CLI::ExistingFile);
  c_cmp->add_option("ref", cmp_ref, "Reference field (.csv or .bin)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*c_train) return train(train_cfgs, jobs, allow_long, quiet);
    if (*c_fdm) return fdm(fdm_cfg, binary);
    if (*c_hfun) return hfun(dim, n);
    if (*c_hs) return halfspace(hs_cfg, allow_long, quiet);
    if (*c_st) return stability(st_cfg);
    if (*c_cmp) return compare(cmp_pred, cmp_ref);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const ExperimentError& e) {
    std::fprintf(stderr, "error in %s\n", e.what());
    return e.numerical() ? kNumerical : kConfig;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const FdmError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  }
  return kOk;
}
