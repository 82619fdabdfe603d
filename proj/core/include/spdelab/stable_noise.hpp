#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "spdelab/rng.hpp"
#include "spdelab/spectrum.hpp"

namespace spdelab {

// Symmetric alpha-stable law, characteristic function exp(-(scale|u|)^alpha).
// alpha = 2 is admitted as a Gaussian test limit (variance 2*scale^2).
struct StableParams {
  double alpha = 1.75;
  double scale = 1.0;

  void validate() const;
};

// One SaS variate via the Chambers-Mallows-Stuck construction.
// Consumes exactly two uniforms from the stream.
double sample_sas(const StableParams& params, RngStream& rng);

std::vector<double> sample_sas(const StableParams& params, std::size_t count, RngStream& rng);

// SaS scale of the stochastic-convolution increment
//   int_0^dt e^{-lambda_n (dt-s)} dL^n_s
// for a mode with amplitude `amplitude`:
//   amplitude * ((1 - e^{-alpha lambda_n dt}) / (alpha lambda_n))^{1/alpha}.
double ou_increment_scale(double lambda_n, double amplitude, double alpha, double dt);

enum class NoiseBand { kSlow, kFast };

// Realized per-step, per-mode convolution increments, exact in law.
// Row-major (step, mode); the generating stream is consumed mode-major
// within each step.
struct NoisePath {
  double dt = 0.0;
  int steps = 0;
  int n_modes = 0;
  double alpha = 0.0;
  std::vector<double> increments;
  SeedLineage seed_lineage;

  std::span<const double> row(int step) const {
    return {increments.data() + static_cast<std::size_t>(step) * n_modes,
            static_cast<std::size_t>(n_modes)};
  }
  bool finite() const;
};

inline constexpr std::size_t kDefaultNoiseBudgetBytes = 512ull << 20;

// For the fast band the increment of eps^{-1/alpha} int e^{(t-s)A/eps} dZ_s
// over a step dt has the law of the unit-rate convolution over dt/eps, so the
// per-step scale is ou_increment_scale(lambda_n, gamma_n, alpha, dt/eps).
NoisePath generate_noise_path(const ModeSpectrum& spectrum, double alpha, NoiseBand band,
                              double dt, int steps, double epsilon, const SeedLineage& lineage,
                              std::size_t memory_budget_bytes = kDefaultNoiseBudgetBytes);

// Reuses the storage of `path` (same law and stream order as generate_noise_path).
void regenerate_noise_path(NoisePath& path, const ModeSpectrum& spectrum, double alpha,
                           NoiseBand band, double dt, int steps, double epsilon,
                           const SeedLineage& lineage,
                           std::size_t memory_budget_bytes = kDefaultNoiseBudgetBytes);

// Aggregates runs of `stride` consecutive fine increments into one coarse
// step via the exact split recursion w <- e^{-lambda_eff dt_fine} w + w_next.
// The result is distributed as a path at stride*dt_fine.
NoisePath aggregate_steps(const NoisePath& fine, const ModeSpectrum& spectrum, double rate_scale,
                          int stride);

inline NoisePath aggregate_pairs(const NoisePath& fine, const ModeSpectrum& spectrum,
                                 double rate_scale) {
  return aggregate_steps(fine, spectrum, rate_scale, 2);
}

// Binary dump: 32-byte header (magic, version, steps, n_modes, dt) followed by
// little-endian row-major doubles. Cross-language replay format.
void dump_noise_path(const NoisePath& path, std::ostream& os);
NoisePath load_noise_path(std::istream& is);

// Assumption diagnostics for a truncated spectrum.
struct AssumptionReport {
  double alpha = 0.0;
  double kappa1 = 0.0;
  double r_beta = 0.0;   // fitted decay beta_n ~ lambda_n^{-r_beta}
  double r_gamma = 0.0;
  double gamma_index = 0.0;  // alpha / (alpha r + 1)

  double sum_beta_alpha = 0.0;
  double sum_gamma_alpha = 0.0;
  double sum_inv_lambda = 0.0;

  std::vector<double> t_grid;
  std::vector<double> lambda1;  // sup_n e^{-lambda_n t} lambda_n^{1/alpha} / beta_n
  std::vector<double> lambda2;  // same with gamma_n
  std::vector<double> lambda3;  // sup_n e^{-lambda_n t} lambda_n^{kappa1+1/alpha} / beta_n

  double integral_lambda_gamma_prime = 0.0;  // quadrature of e^{-t} Lambda_t^{gamma'} on the grid
  double integral_lambda3 = 0.0;             // quadrature of e^{-t} Lambda_{3,kappa1}(t)

  bool beta_sum_converges = false;
  bool gamma_sum_converges = false;
  bool inv_lambda_sum_converges = false;
  bool gamma_index_admissible = false;   // gamma in (1, alpha]
  bool kappa1_admissible = false;        // kappa1 in (0, 1/2)
  bool lambda_integral_finite = false;   // gamma * (r + 1/alpha) <= 1 (envelope)
  bool lambda3_integral_finite = false;  // r + kappa1 + 1/alpha < 1 (envelope)

  bool all_pass() const {
    return beta_sum_converges && gamma_sum_converges && inv_lambda_sum_converges &&
           gamma_index_admissible && kappa1_admissible && lambda_integral_finite &&
           lambda3_integral_finite;
  }
};

// r_hint <= 0 means fit the decay exponent from the spectrum.
AssumptionReport check_assumptions(const ModeSpectrum& spectrum, double alpha, double kappa1,
                                   double r_hint = 0.0);

}  // namespace spdelab
