#include "spdelab/mild_integrator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

namespace spdelab {

StepKernel::StepKernel(const ModeSpectrum& spectrum, double dt, double rate_scale) : dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("StepKernel: dt must be > 0");
  if (!(rate_scale > 0.0)) throw std::invalid_argument("StepKernel: rate_scale must be > 0");
  const int m = spectrum.n_modes();
  decay_.resize(static_cast<std::size_t>(m));
  drift_coef_.resize(static_cast<std::size_t>(m));
  for (int n = 0; n < m; ++n) {
    const double x = spectrum.lambda[n] * rate_scale * dt;
    decay_[static_cast<std::size_t>(n)] = std::exp(-x);
    // (1 - e^{-x}) * rate_scale / (lambda rate_scale) = -expm1(-x) / lambda
    drift_coef_[static_cast<std::size_t>(n)] = -std::expm1(-x) / spectrum.lambda[n];
  }
}

void StepKernel::advance(std::span<double> v, std::span<const double> drift,
                         std::span<const double> noise) const {
  const std::size_t m = decay_.size();
  for (std::size_t n = 0; n < m; ++n)
    v[n] = decay_[n] * v[n] + drift_coef_[n] * drift[n] + noise[n];
}

void StepKernel::advance_nodrift(std::span<double> v, std::span<const double> noise) const {
  const std::size_t m = decay_.size();
  for (std::size_t n = 0; n < m; ++n) v[n] = decay_[n] * v[n] + noise[n];
}

void StepKernel::advance_nonoise(std::span<double> v, std::span<const double> drift) const {
  const std::size_t m = decay_.size();
  for (std::size_t n = 0; n < m; ++n) v[n] = decay_[n] * v[n] + drift_coef_[n] * drift[n];
}

SpectralVec step(const ModeSpectrum& spectrum, const SpectralVec& v, const SpectralVec& drift_value,
                 double dt, std::span<const double> noise_row, double rate_scale) {
  if (v.size() != spectrum.n_modes() || drift_value.size() != spectrum.n_modes() ||
      noise_row.size() != static_cast<std::size_t>(spectrum.n_modes()))
    throw std::invalid_argument("step: dimension mismatch");
  StepKernel kernel(spectrum, dt, rate_scale);
  SpectralVec out = v;
  kernel.advance(out.c, drift_value.c, noise_row);
  return out;
}

Trajectory integrate(const ModeSpectrum& spectrum, const SpectralVec& v0, const DriftField& drift,
                     int n_steps, const NoisePath& noise, double rate_scale, int save_stride) {
  if (v0.size() != spectrum.n_modes()) throw std::invalid_argument("integrate: dimension mismatch");
  if (n_steps < 0) throw std::invalid_argument("integrate: n_steps must be >= 0");
  if (save_stride < 1) throw std::invalid_argument("integrate: save_stride must be >= 1");
  if (noise.steps < n_steps)
    throw std::invalid_argument("integrate: noise path covers " + std::to_string(noise.steps) +
                                " steps, need " + std::to_string(n_steps));

  Trajectory traj;
  traj.dt = noise.dt;
  traj.save_stride = save_stride;
  traj.times.push_back(0.0);
  traj.states.push_back(v0);
  if (n_steps == 0) return traj;

  StepKernel kernel(spectrum, noise.dt, rate_scale);
  SpectralVec v = v0;
  SpectralVec g(static_cast<std::size_t>(spectrum.n_modes()));
  for (int k = 0; k < n_steps; ++k) {
    drift(v, k * noise.dt, g);
    kernel.advance(v.c, g.c, noise.row(k));
    if ((k + 1) % save_stride == 0 || k + 1 == n_steps) {
      traj.times.push_back((k + 1) * noise.dt);
      traj.states.push_back(v);
    }
  }
  return traj;
}

double increment_stats(std::span<const Trajectory> replicas, double delta, double p) {
  if (replicas.empty()) throw std::invalid_argument("increment_stats: no replicas");
  const Trajectory& first = replicas[0];
  const double h = first.dt * first.save_stride;
  const double ratio = delta / h;
  if (delta < h - 1e-12 * h)
    throw std::invalid_argument("increment_stats: delta is below the save resolution");
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument("increment_stats: delta must be a multiple of the save spacing");
  const int stride = static_cast<int>(std::llround(ratio));

  double acc = 0.0;
  for (const Trajectory& traj : replicas) {
    double integral = 0.0;
    for (int i = 0; i < traj.n_saved(); ++i) {
      const int anchor = (i / stride) * stride;
      integral += dist(traj.states[static_cast<std::size_t>(i)],
                       traj.states[static_cast<std::size_t>(anchor)]) *
                  h;
    }
    acc += std::pow(integral, p);
  }
  return acc / static_cast<double>(replicas.size());
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj,
                          const std::string& header_note) {
  if (!header_note.empty()) os << "# " << header_note << "\n";
  os << "t";
  const int m = traj.states.empty() ? 0 : traj.states.front().size();
  for (int n = 1; n <= m; ++n) os << ",mode_" << n;
  os << "\n";
  char buf[32];
  for (int i = 0; i < traj.n_saved(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g", traj.times[static_cast<std::size_t>(i)]);
    os << buf;
    for (int n = 0; n < m; ++n) {
      std::snprintf(buf, sizeof buf, "%.12g", traj.states[static_cast<std::size_t>(i)][n]);
      os << ',' << buf;
    }
    os << "\n";
  }
}

}  // namespace spdelab
