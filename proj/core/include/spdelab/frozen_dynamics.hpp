#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "spdelab/drift.hpp"
#include "spdelab/mild_integrator.hpp"
#include "spdelab/spectral_vec.hpp"
#include "spdelab/spectrum.hpp"
#include "spdelab/stable_noise.hpp"

namespace spdelab {

// Frozen equation dY = [A Y + F(x, Y)] dt + dZ at unit rate; the noise path
// must be a fast-band path generated with epsilon = 1.
Trajectory simulate_frozen(const ModeSpectrum& spectrum, const SpectralVec& x,
                           const SpectralVec& y0, const Drift& f, int n_steps,
                           const NoisePath& noise, int save_stride = 1);

struct ContractionRecord {
  std::vector<double> times;
  std::vector<double> diff_norm;  // |Y^{x1,y1}_t - Y^{x2,y2}_t|
};

// Both solutions consume the identical noise path; with x1 = x2 the
// difference is noise-free and decays pathwise.
ContractionRecord contraction_check(const ModeSpectrum& spectrum, const SpectralVec& x1,
                                    const SpectralVec& x2, const SpectralVec& y1,
                                    const SpectralVec& y2, const Drift& f, int n_steps,
                                    const NoisePath& noise, int save_stride = 1);

struct EstimatorConfig {
  double t_burn = 20.0;
  double t_avg = 40.0;
  double dt = 0.02;
  int n_replicas = 2;
  double stderr_tol = 1.0;
  double quant_step = 1e-3;  // state quantization for the evaluation cache

  void validate() const;
};

struct AveragedDriftEstimate {
  SpectralVec value;           // time-and-ensemble average of B(x, Y_s)
  std::vector<double> stderr_mode;  // IQR-based spread of replica window means
  double t_burn = 0.0;
  double t_avg = 0.0;
  int n_replicas = 0;
  double max_stderr = 0.0;
  bool reliable = true;
};

// Time average of B(x, Y^x_s) over the window [t_burn, t_burn + t_avg],
// combined over replicas. Heavy-tail robust spread (interquartile range).
AveragedDriftEstimate estimate_averaged_drift(const ModeSpectrum& spectrum, double alpha,
                                              const SpectralVec& x, const Drift& b,
                                              const Drift& f, const SpectralVec& y0,
                                              const EstimatorConfig& cfg, std::uint64_t seed);

struct MixingRow {
  int y_index = 0;
  double t = 0.0;
  double value = 0.0;   // MC estimate of P^x_t phi(y)
  double stderr_value = 0.0;
  double gap = 0.0;     // |value - long_run|
};

struct MixingTable {
  std::vector<MixingRow> rows;
  double long_run = 0.0;
  double long_run_stderr = 0.0;
  double fitted_rate = 0.0;  // decay rate of the gap in t (>= 0 expected)
};

MixingTable mixing_check(const ModeSpectrum& spectrum, double alpha, const SpectralVec& x,
                         const Observable& phi, std::span<const SpectralVec> ys,
                         std::span<const double> t_grid, const Drift& f, double dt,
                         int n_replicas, std::uint64_t seed);

struct HolderProbeRow {
  double dx = 0.0;     // |x1 - x2|
  double dbar = 0.0;   // |Bbar(x1) - Bbar(x2)|
  double stderr_sum = 0.0;
};

struct HolderProbeTable {
  std::vector<HolderProbeRow> rows;
  double fitted_slope = 0.0;  // log-log slope of dbar against dx
};

HolderProbeTable averaged_drift_holder_probe(const ModeSpectrum& spectrum, double alpha,
                                             std::span<const std::pair<SpectralVec, SpectralVec>> x_pairs,
                                             const Drift& b, const Drift& f, const SpectralVec& y0,
                                             const EstimatorConfig& cfg, std::uint64_t seed);

// Cached averaged-drift evaluation. Keys are componentwise quantized states;
// the estimator substream is derived from (master seed, key), so the value at
// a key does not depend on visit order or scheduling. Thread-safe.
class BbarEstimator {
 public:
  BbarEstimator(const ModeSpectrum& spectrum, double alpha, const Drift& b, const Drift& f,
                const SpectralVec& y0, EstimatorConfig cfg, std::uint64_t master_seed);

  // Throws NumericalError when an estimate is flagged unreliable; the
  // offending state is recorded and available via last_offending().
  SpectralVec evaluate(const SpectralVec& x);

  std::uint64_t calls() const { return calls_; }
  std::uint64_t cache_hits() const { return hits_; }
  // running mean over computed entries of the per-call max stderr
  double mean_stderr() const;
  const SpectralVec& last_offending() const { return offending_; }

 private:
  std::vector<std::int64_t> quantize(const SpectralVec& x) const;

  const ModeSpectrum& spectrum_;
  double alpha_;
  const Drift& b_;
  const Drift& f_;
  SpectralVec y0_;
  EstimatorConfig cfg_;
  std::uint64_t master_seed_;

  struct KeyHash {
    std::size_t operator()(const std::vector<std::int64_t>& k) const;
  };
  std::unordered_map<std::vector<std::int64_t>, SpectralVec, KeyHash> cache_;
  mutable std::mutex mutex_;
  std::uint64_t calls_ = 0;
  std::uint64_t hits_ = 0;
  double stderr_sum_ = 0.0;
  std::uint64_t stderr_count_ = 0;
  SpectralVec offending_;
};

}  // namespace spdelab
