#pragma once

#include <vector>

#include "spdelab/spectral_vec.hpp"
#include "spdelab/spectrum.hpp"

namespace spdelab {

// coefficient n multiplied by e^{-lambda_n t}; contracts by e^{-lambda_1 t}
SpectralVec semigroup_apply(const ModeSpectrum& spectrum, double t, const SpectralVec& v);

// (sum_n lambda_n^theta v_n^2)^{1/2}; theta = 0 is the plain norm
double frac_norm(const ModeSpectrum& spectrum, double theta, const SpectralVec& v);

// sup_{s>0} s^{theta/2} e^{-s} = (theta/2)^{theta/2} e^{-theta/2}
double sp2_constant(double theta);

// sup_{s>0} s^{-theta/2} (1 - e^{-s}), evaluated numerically; theta in [0, 2)
double sp3_constant(double theta);

struct SmoothingCheck {
  double lhs = 0.0;    // ||e^{tA} v||_theta
  double bound = 0.0;  // sp2_constant(theta) t^{-theta/2} |v|
};
SmoothingCheck smoothing_check(const ModeSpectrum& spectrum, double theta, double t,
                               const SpectralVec& v);

// Function samples at the interior collocation nodes of D = [0, pi];
// Dirichlet boundary values are implicitly zero.
struct PhysicalGrid {
  std::vector<double> values;
  int n_points() const { return static_cast<int>(values.size()); }
};

// Discrete sine expansion in the basis e_n(xi) = sqrt(2/pi) sin(n xi) at the
// nodes xi_j = j pi / (n_points + 1). Exact transform pair for
// n_modes <= n_points; construction requires n_points >= 2 n_modes so that
// pointwise nonlinearities stay resolved.
class SineTransform {
 public:
  SineTransform(int n_modes, int n_points);

  int n_modes() const { return n_modes_; }
  int n_points() const { return n_points_; }
  double node(int j) const;         // xi_j
  double quad_weight() const;       // pi / (n_points + 1)

  void to_physical(const SpectralVec& v, PhysicalGrid& grid) const;
  void from_physical(const PhysicalGrid& grid, SpectralVec& v) const;
  PhysicalGrid to_physical(const SpectralVec& v) const;
  SpectralVec from_physical(const PhysicalGrid& grid) const;

 private:
  int n_modes_;
  int n_points_;
  std::vector<double> basis_;  // (j, n) -> sqrt(2/pi) sin((n+1) xi_j)
};

}  // namespace spdelab
