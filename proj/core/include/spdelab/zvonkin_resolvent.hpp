#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spdelab/spectrum.hpp"

namespace spdelab {

// Levy-measure constant pinning nu(dz) = c_alpha |z|^{-1-alpha} dz to the
// unit SaS scale per unit time (cf exp(-t |u|^alpha)).
double stable_levy_constant(double alpha);

// B_bar restricted to a 1- or 2-mode truncation, evaluated at a point:
// out[0..dims) = components of B_bar(x[0..dims)).
using GridDrift = std::function<void(const double* x, double* out)>;

struct FeynmanKacConfig {
  double t_max = 0.0;   // 0 -> 14 / lambda, keeps e^{-lambda t_max} <= 1e-6
  int n_time = 48;      // log-spaced quadrature nodes on (t_head, t_max]
  int n_paths = 512;    // Monte Carlo paths per time node (shared across grid nodes)
  double t_head_frac = 1e-4;
  enum class Boundary { kClamp, kAbsorb } boundary = Boundary::kClamp;
  std::uint64_t seed = 0x5eedf00d;

  double resolved_t_max(double lambda) const { return t_max > 0.0 ? t_max : 14.0 / lambda; }
  void validate(double lambda) const;
};

struct ResolventGrid {
  double lambda = 0.0;
  int dims = 1;
  double half_width = 0.0;
  int nodes_per_dim = 0;
  // node-major value layout: u[node*dims + i], du[(node*dims + i)*dims + j]
  std::vector<double> u;
  std::vector<double> du;

  int n_nodes() const;
  double spacing() const { return 2.0 * half_width / (nodes_per_dim - 1); }
  double coord(int node, int d) const;
  double u_sup() const;
  double du_sup() const;  // max absolute gradient entry
};

struct PicardResult {
  ResolventGrid grid;
  bool converged = false;
  bool contraction_failed = false;
  int iterations = 0;
  std::vector<double> change_history;
  double mc_noise_estimate = 0.0;  // half-sample split of the final apply
  std::string diagnostic;
};

// Fixed-point iteration for the resolvent integral representation
//   U <- int_0^inf e^{-lambda t} T_t(<B_bar, DU> + B_bar) dt
// with T_t evaluated by Monte Carlo over exact-in-law stable OU paths shared
// across grid nodes (common random numbers), integrands interpolated on the
// grid with the configured boundary policy. The quadrature weights are
// normalized so constants integrate exactly to 1/lambda.
PicardResult picard_solve(const ModeSpectrum& spectrum, double alpha, double lambda,
                          const GridDrift& b_bar, int dims, double half_width, int nodes_per_dim,
                          const FeynmanKacConfig& fk, int max_iter = 40, double tol = 1e-3);

// half_width <= 0 selects 5x the stationary scale of the linear dynamics
double default_half_width(const ModeSpectrum& spectrum, double alpha, int dims);

struct DecayRow {
  double lambda = 0.0;
  double u_norm = 0.0;
  double du_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  double mc_noise = 0.0;
};

std::vector<DecayRow> norm_decay_probe(const ModeSpectrum& spectrum, double alpha,
                                       std::vector<double> lambdas, const GridDrift& b_bar,
                                       int dims, double half_width, int nodes_per_dim,
                                       const FeynmanKacConfig& fk, int max_iter = 40,
                                       double tol = 1e-3);

struct JumpQuadratureConfig {
  double split_c = 1.0;   // small/large jump split
  int n_small = 400;      // quadrature points on [h, c]
  int n_large = 400;      // quadrature points on [c, z_far]
  double z_far_factor = 3.0;  // z_far = factor * half_width
};

// Pointwise generator residual lambda U - Lbar U - B_bar on the grid (dims = 1):
//   Lbar U = -lambda_1 x U' + B_bar U' + beta_1^alpha J(U)
// with the nonlocal part J(U) split at |z| <= c (compensated, via symmetrized
// second differences) and |z| > c (direct, clamped interpolation).
std::vector<double> generator_residual(const ModeSpectrum& spectrum, double alpha,
                                       const ResolventGrid& grid,
                                       const std::vector<double>& b_bar_values,
                                       const JumpQuadratureConfig& jq = {});

// sup of |residual| over the inner 50% of the box
double core_sup(const ResolventGrid& grid, const std::vector<double>& residual);

}  // namespace spdelab
