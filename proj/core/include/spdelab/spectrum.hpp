#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdelab {

// Truncated diagonal spectrum: eigenvalues of -A together with the per-mode
// noise amplitudes of the slow (beta) and fast (gamma) driving processes.
struct ModeSpectrum {
  std::vector<double> lambda;      // > 0, strictly increasing
  std::vector<double> beta;        // slow-noise amplitudes, > 0
  std::vector<double> gamma_coef;  // fast-noise amplitudes, > 0

  int n_modes() const { return static_cast<int>(lambda.size()); }

  void validate() const {
    if (lambda.empty()) throw std::invalid_argument("spectrum: no modes");
    if (beta.size() != lambda.size() || gamma_coef.size() != lambda.size())
      throw std::invalid_argument("spectrum: amplitude sequences must match n_modes");
    double prev = 0.0;
    for (std::size_t n = 0; n < lambda.size(); ++n) {
      if (!(lambda[n] > prev))
        throw std::invalid_argument("spectrum: lambda must be positive and strictly increasing (mode " +
                                    std::to_string(n + 1) + ")");
      if (!(beta[n] > 0.0) || !(gamma_coef[n] > 0.0))
        throw std::invalid_argument("spectrum: amplitudes must be positive (mode " +
                                    std::to_string(n + 1) + ")");
      prev = lambda[n];
    }
  }

  // lambda_n = n^lambda_power, beta_n = gamma_n = amp * lambda_n^{-r}
  static ModeSpectrum power_law(int n_modes, double lambda_power, double r, double amp = 1.0) {
    if (n_modes < 1) throw std::invalid_argument("spectrum: n_modes must be >= 1");
    ModeSpectrum s;
    s.lambda.resize(n_modes);
    s.beta.resize(n_modes);
    s.gamma_coef.resize(n_modes);
    for (int n = 0; n < n_modes; ++n) {
      const double lam = std::pow(static_cast<double>(n + 1), lambda_power);
      s.lambda[n] = lam;
      s.beta[n] = amp * std::pow(lam, -r);
      s.gamma_coef[n] = s.beta[n];
    }
    return s;
  }
};

}  // namespace spdelab
