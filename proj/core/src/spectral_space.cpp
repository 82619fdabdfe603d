#include "spdelab/spectral_space.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spdelab {

SpectralVec semigroup_apply(const ModeSpectrum& spectrum, double t, const SpectralVec& v) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be >= 0");
  if (v.size() != spectrum.n_modes())
    throw std::invalid_argument("semigroup_apply: dimension mismatch");
  SpectralVec out = v;
  for (int n = 0; n < out.size(); ++n) out[n] *= std::exp(-spectrum.lambda[n] * t);
  return out;
}

double frac_norm(const ModeSpectrum& spectrum, double theta, const SpectralVec& v) {
  if (theta < 0.0) throw std::invalid_argument("frac_norm: theta must be >= 0");
  if (v.size() != spectrum.n_modes()) throw std::invalid_argument("frac_norm: dimension mismatch");
  double s = 0.0;
  for (int n = 0; n < v.size(); ++n) s += std::pow(spectrum.lambda[n], theta) * v[n] * v[n];
  return std::sqrt(s);
}

double sp2_constant(double theta) {
  if (theta < 0.0) throw std::invalid_argument("sp2_constant: theta must be >= 0");
  if (theta == 0.0) return 1.0;
  const double h = 0.5 * theta;
  return std::pow(h, h) * std::exp(-h);
}

double sp3_constant(double theta) {
  if (theta < 0.0 || theta >= 2.0)
    throw std::invalid_argument("sp3_constant: theta must lie in [0, 2)");
  if (theta == 0.0) return 1.0;
  // supremum of s^{-theta/2}(1-e^{-s}) over a dense log grid
  double best = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double s = std::exp(-12.0 + 24.0 * i / 4000.0);
    best = std::max(best, std::pow(s, -0.5 * theta) * (-std::expm1(-s)));
  }
  return best;
}

SmoothingCheck smoothing_check(const ModeSpectrum& spectrum, double theta, double t,
                               const SpectralVec& v) {
  if (theta < 0.0) throw std::invalid_argument("smoothing_check: theta must be >= 0");
  if (theta > 0.0 && !(t > 0.0))
    throw std::invalid_argument("smoothing_check: bound is singular at t = 0 for theta > 0");
  if (theta == 0.0 && t < 0.0) throw std::invalid_argument("smoothing_check: t must be >= 0");
  SmoothingCheck chk;
  chk.lhs = frac_norm(spectrum, theta, semigroup_apply(spectrum, t, v));
  chk.bound = theta == 0.0 ? v.norm() : sp2_constant(theta) * std::pow(t, -0.5 * theta) * v.norm();
  return chk;
}

SineTransform::SineTransform(int n_modes, int n_points)
    : n_modes_(n_modes), n_points_(n_points) {
  if (n_modes < 1) throw std::invalid_argument("SineTransform: need n_modes >= 1");
  if (n_points < 2 * n_modes)
    throw std::invalid_argument("SineTransform: n_points must be >= 2*n_modes (aliasing), got " +
                                std::to_string(n_points) + " for " + std::to_string(n_modes) +
                                " modes");
  basis_.resize(static_cast<std::size_t>(n_points) * n_modes);
  const double amp = std::sqrt(2.0 / std::numbers::pi);
  for (int j = 0; j < n_points; ++j) {
    const double xi = node(j);
    for (int n = 0; n < n_modes; ++n)
      basis_[static_cast<std::size_t>(j) * n_modes + n] = amp * std::sin((n + 1) * xi);
  }
}

double SineTransform::node(int j) const {
  return std::numbers::pi * (j + 1) / (n_points_ + 1);
}

double SineTransform::quad_weight() const { return std::numbers::pi / (n_points_ + 1); }

void SineTransform::to_physical(const SpectralVec& v, PhysicalGrid& grid) const {
  if (v.size() != n_modes_) throw std::invalid_argument("to_physical: dimension mismatch");
  grid.values.assign(static_cast<std::size_t>(n_points_), 0.0);
  for (int j = 0; j < n_points_; ++j) {
    const double* row = basis_.data() + static_cast<std::size_t>(j) * n_modes_;
    double s = 0.0;
    for (int n = 0; n < n_modes_; ++n) s += row[n] * v[n];
    grid.values[static_cast<std::size_t>(j)] = s;
  }
}

void SineTransform::from_physical(const PhysicalGrid& grid, SpectralVec& v) const {
  if (grid.n_points() != n_points_) throw std::invalid_argument("from_physical: grid size mismatch");
  v.c.assign(static_cast<std::size_t>(n_modes_), 0.0);
  // adjoint of the node evaluation; the basis table carries sqrt(2/pi), so
  // discrete orthogonality makes pi/(n_points+1) the exact inverse weight
  const double w = quad_weight();
  for (int j = 0; j < n_points_; ++j) {
    const double* row = basis_.data() + static_cast<std::size_t>(j) * n_modes_;
    const double g = grid.values[static_cast<std::size_t>(j)] * w;
    for (int n = 0; n < n_modes_; ++n) v[n] += row[n] * g;
  }
}

PhysicalGrid SineTransform::to_physical(const SpectralVec& v) const {
  PhysicalGrid g;
  to_physical(v, g);
  return g;
}

SpectralVec SineTransform::from_physical(const PhysicalGrid& grid) const {
  SpectralVec v;
  from_physical(grid, v);
  return v;
}

}  // namespace spdelab
