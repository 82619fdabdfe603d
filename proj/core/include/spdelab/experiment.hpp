#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spdelab/spectrum.hpp"

namespace spdelab {

// Fully resolved experiment plan. The flat key = value sections mirror this
// struct one to one; every field has a default (the heat1d preset) and the
// resolved values are echoed verbatim into each run's output directory.
struct ExperimentConfig {
  struct Experiment {
    std::string kind = "converge";
    std::string preset = "heat1d";
    std::uint64_t seed = 42;
    std::string out = "runs/out";
    int jobs = 1;
    bool strict_assumptions = false;
    int memory_budget_mb = 512;
    bool export_trajectories = false;
  } experiment;

  struct Spectrum {
    int n_modes = 8;
    double alpha = 1.75;
    double lambda_power = 2.0;
    double r = 0.35;
    double amp = 1.0;
    double kappa1 = 0.05;
  } spectrum;

  struct Grid {
    int n_points = 16;
  } grid;

  struct DriftB {
    std::string kind = "sincos";
    double ax = 1.0;
    double ay = 1.0;
    double eta1 = 0.9;
    double eta2 = 0.9;
    double eta_x = 0.5;
    double eta_y = 0.5;
  } drift_b;

  struct DriftF {
    std::string kind = "sinsin";
    double ax = 1.0;
    double ay = 0.5;
    double eta3 = 0.9;
    double eta_x = 0.5;
    double eta_y = 0.5;
  } drift_f;

  struct Run {
    double T = 1.0;
    double dt_macro = 1e-3;
    std::vector<double> epsilons{0.1, 0.02, 0.004};
    double epsilon = 0.05;  // single-epsilon kinds
    std::string delta_policy = "sqrt_eps";
    double delta = 0.1;
    int replicas = 64;
    std::vector<double> p_moments{0.5, 1.0, 2.0};
    double theta = 1.0;
    double theta_prime = 0.8;
    double micro_kappa = 10.0;
    std::vector<double> x_coeffs;   // zero-padded to n_modes
    std::vector<double> y0_coeffs;  // zero-padded to n_modes
  } run;

  struct Estimator {
    double t_burn = 15.0;
    double t_avg = 25.0;
    double dt = 0.02;
    int replicas = 2;
    double stderr_tol = 1.0;
    double quant_step = 1e-3;
  } estimator;

  struct Frozen {
    double t_burn = 20.0;
    double t_avg = 200.0;
    double dt = 0.01;
    int replicas = 16;
    double stderr_tol = 0.05;
    std::vector<double> t_grid{1, 2, 5, 10, 20, 40};
    double mixing_far_scale = 2.0;
    int mixing_replicas = 256;
  } frozen;

  struct Zvonkin {
    int dims = 1;
    std::string drift = "tanh";
    double drift_scale = 1.0;
    double const_value = 0.7;
    std::vector<double> lambdas{1, 5, 25};
    double half_width = 0.0;  // 0 -> auto
    int nodes_per_dim = 101;
    double t_max = 0.0;  // 0 -> auto
    int n_time = 48;
    int n_paths = 512;
    double picard_tol = 1e-3;
    int max_iter = 40;
    std::string boundary = "clamp";
    double split_c = 1.0;
  } zvonkin;

  struct Noise {
    std::vector<double> alphas{1.5, 1.75, 1.95, 2.0};
    int samples = 1000000;
    double split_dt = 0.05;
    int split_samples = 200000;
    bool dump_path = false;
  } noise;

  ModeSpectrum make_spectrum() const {
    return ModeSpectrum::power_law(spectrum.n_modes, spectrum.lambda_power, spectrum.r,
                                   spectrum.amp);
  }

  // canonical echo of the resolved plan (all sections, schema order)
  std::string echo() const;
  // FNV-1a over the echo minus the execution-only keys (out, jobs)
  std::string config_hash() const;
};

struct ConfigLoadResult {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty() && config.has_value(); }
};

ConfigLoadResult load_config_text(const std::string& text);
ConfigLoadResult load_config_file(const std::string& path);

// default plan = heat1d preset
ExperimentConfig preset_heat1d();

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitResourceError = 3;
inline constexpr int kExitNumericalError = 4;

struct RunResult {
  int exit_code = kExitOk;
  std::string status = "ok";
  std::vector<std::string> failures;
  std::vector<std::string> files;
};

// Executes the configured run kind, writing config.echo, summary.json,
// manifest.json and the kind-specific CSV artifacts into experiment.out.
RunResult run_experiment(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& text);

}  // namespace spdelab
