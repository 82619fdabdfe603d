#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spdelab/drift.hpp"
#include "spdelab/frozen_dynamics.hpp"
#include "spdelab/mild_integrator.hpp"
#include "spdelab/spectral_vec.hpp"
#include "spdelab/spectrum.hpp"
#include "spdelab/stable_noise.hpp"

namespace spdelab {

struct SlowFastConfig {
  ModeSpectrum spectrum;
  double alpha = 1.75;
  SpectralVec x0, y0;
  double epsilon = 0.1;
  double T = 1.0;
  double dt_macro = 1e-3;
  double delta = 0.0;        // 0 -> sqrt(epsilon), rounded to the macro grid
  double micro_kappa = 10.0; // fast micro-step policy dt_fast <= epsilon/kappa
  std::uint64_t master_seed = 42;
  std::uint32_t replica = 0;
  std::uint32_t fast_stream = 0;  // distinguishes fast noise per epsilon point
  std::size_t memory_budget_bytes = kDefaultNoiseBudgetBytes;

  void validate() const;
  int n_macro_steps() const;
  // dt_fast = dt_macro / ceil(kappa * dt_macro / epsilon)
  int n_micro() const;
  double dt_micro() const { return dt_macro / n_micro(); }
  double resolved_delta() const;

  NoisePath make_slow_noise() const;
  NoisePath make_fast_noise() const;
};

struct SlowFastResult {
  Trajectory x;  // slow state on the macro grid
  Trajectory y;  // fast state subsampled at macro nodes
};

// Coupled system: the fast equation advances on the micro grid with the slow
// state frozen at the containing macro node; the slow equation advances on
// the macro grid with left-point drift B(X_k, Y_k).
SlowFastResult run_slow_fast(const SlowFastConfig& cfg, const Drift& b, const Drift& f,
                             const NoisePath& slow_noise, const NoisePath& fast_noise);
SlowFastResult run_slow_fast(const SlowFastConfig& cfg, const Drift& b, const Drift& f);

// Averaged equation driven by the identical realized slow noise. The drift
// source is either the cached ergodic estimator or a registered y-independent
// closed form.
Trajectory run_averaged(const SlowFastConfig& cfg, BbarEstimator& bbar,
                        const NoisePath& slow_noise);
Trajectory run_averaged(const SlowFastConfig& cfg, const Drift& bbar_closed_form,
                        const NoisePath& slow_noise);

// Auxiliary fast process: on [k delta, (k+1) delta) the drift's slow argument
// is X at the block anchor. Consumes the identical fast noise.
Trajectory khasminskii_auxiliary(const SlowFastConfig& cfg, const Drift& f,
                                 const Trajectory& x_macro, const NoisePath& fast_noise);

struct KhasminskiiProbe {
  std::vector<double> deltas;
  // integrals[d][r] = int_0^T |Y_t - Yhat_t| dt for replica r at deltas[d]
  std::vector<std::vector<double>> integrals;
  std::vector<double> medians;
};

// Per replica the coupled pair (X, Y) is simulated once and Yhat re-run per
// delta with the same fast noise, so the delta comparison is pathwise coupled.
KhasminskiiProbe khasminskii_delta_probe(const SlowFastConfig& base, const Drift& b,
                                         const Drift& f, std::span<const double> deltas,
                                         int n_replicas, int jobs = 1);

struct ErrorReport {
  std::vector<double> sup_errors;  // per replica, macro-grid sup_t |X^eps - Xbar|
  double median = 0.0;
  double q05 = 0.0, q25 = 0.0, q75 = 0.0, q95 = 0.0;
  std::vector<double> p_set;
  std::vector<double> moments;  // mean over replicas of sup^p
  double theta_tilde = 0.0;
  double ceiling = 0.0;  // 2 M_B / lambda_1 + 2 M_B T
  bool ceiling_ok = true;
};

// sup over the shared save grid of |a - b|
double sup_distance(const Trajectory& a, const Trajectory& b);

ErrorReport strong_error(std::span<const double> sup_errors, std::span<const double> p_set,
                         double theta_tilde, double ceiling);

struct StudyConfig {
  SlowFastConfig base;             // epsilon/replica/fast_stream overridden per point
  std::vector<double> epsilons;    // strictly decreasing
  int n_replicas = 64;
  std::vector<double> p_set{0.5, 1.0, 2.0};
  double theta = 1.0;
  double theta_prime = 0.8;
  double gamma_index = 0.0;   // from the assumption report
  double fixed_delta = 0.0;   // 0 -> delta = sqrt(epsilon) per point
  int jobs = 1;

  void validate() const;
};

struct StudyRow {
  double epsilon = 0.0;
  double delta = 0.0;
  int replicas = 0;
  bool ok = false;
  std::string error;
  ErrorReport report;
};

struct StudyTable {
  std::vector<StudyRow> rows;
  double theta_tilde = 0.0;
  double fitted_slope = 0.0;      // log median error against log epsilon
  bool have_slope = false;
  bool medians_monotone = false;  // non-increasing along the decreasing list
  bool endpoints_strict = false;  // strictly smaller at the last epsilon
};

// nominal theta_tilde = theta * min(eta1 ^ (eta2*eta3), gamma + theta' - 1) / 2
double nominal_theta_tilde(const DriftSpec& b, const DriftSpec& f, double theta,
                           double theta_prime, double gamma_index);

StudyTable convergence_study(const StudyConfig& cfg, const Drift& b, const Drift& f,
                             BbarEstimator& bbar);

}  // namespace spdelab
