#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "spdelab/spectral_space.hpp"
#include "spdelab/spectral_vec.hpp"

namespace spdelab {

enum class DriftArity { kOneArg, kTwoArg };

// A registered bounded drift. Pointwise (Nemytskii) kinds act on function
// values over the collocation grid; "const" acts directly on coefficients.
//
// kinds:
//   zero                  0
//   const                 fixed coefficient vector
//   sincos    (x,y)(xi) = ax sin(x(xi)) + ay cos(y(xi))
//   sinsin    (x,y)(xi) = ax sin(x(xi)) + ay sin(y(xi))
//   sin_x       (x)(xi) = ax sin(x(xi))              (y-independent)
//   sin_y       (y)(xi) = ay sin(y(xi))              (x-independent)
//   holder    (x,y)(xi) = ax h(x(xi); eta_x) + ay h(y(xi); eta_y)
// with h(u; eta) = sign(u) min(|u|, 1)^eta (Hoelder-only, not Lipschitz).
struct DriftSpec {
  std::string kind = "zero";
  DriftArity arity = DriftArity::kTwoArg;
  double ax = 0.0;
  double ay = 0.0;
  double eta_x = 0.5;
  double eta_y = 0.5;
  std::vector<double> const_coeffs;

  // declared constants (filled by make_drift when left at zero)
  double bound = 0.0;          // sup-norm bound M in H
  double eta1 = 1.0;           // Hoelder exponent in x (B role)
  double eta2 = 1.0;           // Hoelder exponent in y (B role)
  double eta3 = 1.0;           // Hoelder exponent in x (F role)
  double holder_const = 1.0;
  double lipschitz_in_y = std::numeric_limits<double>::infinity();  // L_F
  bool y_independent = false;
  bool x_independent = false;
};

class Drift {
 public:
  Drift(DriftSpec spec, std::shared_ptr<const SineTransform> transform);

  const DriftSpec& spec() const { return spec_; }

  struct Scratch {
    PhysicalGrid gx, gy, gout;
  };

  // out = G(x, y); pointwise kinds go through transform -> map -> inverse
  void eval(const SpectralVec& x, const SpectralVec& y, SpectralVec& out, Scratch& s) const;
  SpectralVec eval(const SpectralVec& x, const SpectralVec& y) const;
  // one-argument view for y-independent drifts
  SpectralVec eval(const SpectralVec& x) const;

 private:
  DriftSpec spec_;
  std::shared_ptr<const SineTransform> transform_;
};

// Fills derived constants (bound, Lipschitz/Hoelder data) and validates the
// kind and parameters.
Drift make_drift(DriftSpec spec, std::shared_ptr<const SineTransform> transform);

// Throws when F cannot serve as a fast drift: lambda_1 - L_F must be positive.
void check_dissipativity(const ModeSpectrum& spectrum, const Drift& f);

// Scalar observable on H for mixing diagnostics.
// kinds: const (value a), coord (y_k), sin_mode (a sin(y_k)).
struct ObservableSpec {
  std::string kind = "sin_mode";
  int mode = 0;  // 0-based
  double a = 1.0;
  double holder_beta = 1.0;
};

class Observable {
 public:
  explicit Observable(ObservableSpec spec);
  const ObservableSpec& spec() const { return spec_; }
  double eval(const SpectralVec& y) const;

 private:
  ObservableSpec spec_;
};

}  // namespace spdelab
