#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "spdelab/spectral_vec.hpp"
#include "spdelab/spectrum.hpp"
#include "spdelab/stable_noise.hpp"

namespace spdelab {

struct Trajectory {
  double dt = 0.0;
  int save_stride = 1;
  std::vector<double> times;
  std::vector<SpectralVec> states;

  int n_saved() const { return static_cast<int>(states.size()); }
  const SpectralVec& back() const { return states.back(); }
};

// Exponential-Euler update coefficients for dV = rate_scale*(A V + G) dt + dNoise,
// exact in the linear part. Per mode:
//   v' = e^{-lambda_n rs dt} v + (1 - e^{-lambda_n rs dt}) / lambda_n * g + w.
class StepKernel {
 public:
  StepKernel(const ModeSpectrum& spectrum, double dt, double rate_scale);

  double dt() const { return dt_; }
  int n_modes() const { return static_cast<int>(decay_.size()); }

  void advance(std::span<double> v, std::span<const double> drift,
               std::span<const double> noise) const;
  void advance_nodrift(std::span<double> v, std::span<const double> noise) const;
  // drift-only half of the update (difference systems where noise cancels)
  void advance_nonoise(std::span<double> v, std::span<const double> drift) const;

 private:
  double dt_;
  std::vector<double> decay_;       // e^{-lambda_n rs dt}
  std::vector<double> drift_coef_;  // (1 - decay_n) / lambda_n
};

// One exponential-Euler step (pure).
SpectralVec step(const ModeSpectrum& spectrum, const SpectralVec& v, const SpectralVec& drift_value,
                 double dt, std::span<const double> noise_row, double rate_scale);

// Time-dependent drift field G(v, t) evaluated into `out`.
using DriftField = std::function<void(const SpectralVec& v, double t, SpectralVec& out)>;

// Integrates n_steps steps of size noise.dt from v0, left-point drift.
// States are recorded at t=0 and after every save_stride-th step.
Trajectory integrate(const ModeSpectrum& spectrum, const SpectralVec& v0, const DriftField& drift,
                     int n_steps, const NoisePath& noise, double rate_scale, int save_stride = 1);

// Monte Carlo estimate over replicas of [ integral_0^T |X_t - X_{t(delta)}| dt ]^p
// on the save grid, with t(delta) = floor(t/delta) delta.
double increment_stats(std::span<const Trajectory> replicas, double delta, double p);

// CSV with columns t, mode_1..mode_N.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::string& header_note);

}  // namespace spdelab
