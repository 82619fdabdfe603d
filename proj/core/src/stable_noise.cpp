#include "spdelab/stable_noise.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "spdelab/errors.hpp"

namespace spdelab {

void StableParams::validate() const {
  if (!(alpha > 1.0) || !(alpha <= 2.0))
    throw std::invalid_argument("StableParams: alpha must lie in (1, 2], got " + std::to_string(alpha));
  if (!(scale > 0.0))
    throw std::invalid_argument("StableParams: scale must be positive, got " + std::to_string(scale));
}

double sample_sas(const StableParams& params, RngStream& rng) {
  const double a = params.alpha;
  const double u = std::numbers::pi * (rng.uniform_open() - 0.5);  // (-pi/2, pi/2)
  const double w = rng.exp1();
  const double s = std::sin(a * u) / std::pow(std::cos(u), 1.0 / a) *
                   std::pow(std::cos(u - a * u) / w, (1.0 - a) / a);
  return params.scale * s;
}

std::vector<double> sample_sas(const StableParams& params, std::size_t count, RngStream& rng) {
  params.validate();
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = sample_sas(params, rng);
  return out;
}

double ou_increment_scale(double lambda_n, double amplitude, double alpha, double dt) {
  if (!(lambda_n > 0.0)) throw std::invalid_argument("ou_increment_scale: lambda_n must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("ou_increment_scale: dt must be > 0");
  StableParams{alpha, amplitude > 0.0 ? amplitude : 1.0}.validate();
  const double x = alpha * lambda_n * dt;
  return amplitude * std::pow(-std::expm1(-x) / (alpha * lambda_n), 1.0 / alpha);
}

bool NoisePath::finite() const {
  for (double v : increments)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

void fill_path(NoisePath& path, const ModeSpectrum& spectrum, double alpha, NoiseBand band,
               double dt, int steps, double epsilon) {
  const int m = spectrum.n_modes();
  std::vector<double> scales(static_cast<std::size_t>(m));
  const double dt_eff = (band == NoiseBand::kFast) ? dt / epsilon : dt;
  for (int n = 0; n < m; ++n) {
    const double amp = (band == NoiseBand::kFast) ? spectrum.gamma_coef[n] : spectrum.beta[n];
    scales[static_cast<std::size_t>(n)] = ou_increment_scale(spectrum.lambda[n], amp, alpha, dt_eff);
  }

  RngStream rng(path.seed_lineage);
  const StableParams unit{alpha, 1.0};
  double* out = path.increments.data();
  for (int k = 0; k < steps; ++k) {
    for (int n = 0; n < m; ++n) {
      *out++ = scales[static_cast<std::size_t>(n)] * sample_sas(unit, rng);
    }
  }
}

}  // namespace

NoisePath generate_noise_path(const ModeSpectrum& spectrum, double alpha, NoiseBand band,
                              double dt, int steps, double epsilon, const SeedLineage& lineage,
                              std::size_t memory_budget_bytes) {
  NoisePath path;
  regenerate_noise_path(path, spectrum, alpha, band, dt, steps, epsilon, lineage,
                        memory_budget_bytes);
  return path;
}

void regenerate_noise_path(NoisePath& path, const ModeSpectrum& spectrum, double alpha,
                           NoiseBand band, double dt, int steps, double epsilon,
                           const SeedLineage& lineage, std::size_t memory_budget_bytes) {
  spectrum.validate();
  StableParams{alpha, 1.0}.validate();
  if (steps < 0) throw std::invalid_argument("generate_noise_path: steps must be >= 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("generate_noise_path: epsilon must be > 0");
  if (band == NoiseBand::kSlow && epsilon != 1.0)
    throw std::invalid_argument("generate_noise_path: slow band requires epsilon == 1");
  if (steps > 0 && !(dt > 0.0)) throw std::invalid_argument("generate_noise_path: dt must be > 0");

  const std::size_t n_values = static_cast<std::size_t>(steps) * spectrum.n_modes();
  if (n_values * sizeof(double) > memory_budget_bytes)
    throw ResourceError("noise path of " + std::to_string(steps) + " steps x " +
                        std::to_string(spectrum.n_modes()) + " modes exceeds the memory budget (" +
                        std::to_string(n_values * sizeof(double)) + " > " +
                        std::to_string(memory_budget_bytes) + " bytes)");

  path.dt = dt;
  path.steps = steps;
  path.n_modes = spectrum.n_modes();
  path.alpha = alpha;
  path.seed_lineage = lineage;
  path.increments.resize(n_values);
  if (steps > 0) fill_path(path, spectrum, alpha, band, dt, steps, epsilon);
}

NoisePath aggregate_steps(const NoisePath& fine, const ModeSpectrum& spectrum, double rate_scale,
                          int stride) {
  if (stride < 2) throw std::invalid_argument("aggregate_steps: stride must be >= 2");
  if (fine.steps % stride != 0)
    throw std::invalid_argument("aggregate_steps: step count not divisible by the stride");
  if (fine.n_modes != spectrum.n_modes())
    throw std::invalid_argument("aggregate_steps: mode count mismatch");
  NoisePath coarse;
  coarse.dt = stride * fine.dt;
  coarse.steps = fine.steps / stride;
  coarse.n_modes = fine.n_modes;
  coarse.alpha = fine.alpha;
  coarse.seed_lineage = fine.seed_lineage;
  coarse.increments.resize(fine.increments.size() / static_cast<std::size_t>(stride));
  const int m = fine.n_modes;
  std::vector<double> decay(static_cast<std::size_t>(m));
  for (int n = 0; n < m; ++n)
    decay[static_cast<std::size_t>(n)] = std::exp(-spectrum.lambda[n] * rate_scale * fine.dt);
  for (int k = 0; k < coarse.steps; ++k) {
    double* out = coarse.increments.data() + static_cast<std::size_t>(k) * m;
    const double* row = fine.increments.data() + static_cast<std::size_t>(k) * stride * m;
    for (int n = 0; n < m; ++n) out[n] = row[n];
    for (int j = 1; j < stride; ++j) {
      row += m;
      for (int n = 0; n < m; ++n)
        out[n] = decay[static_cast<std::size_t>(n)] * out[n] + row[n];
    }
  }
  return coarse;
}

namespace {

constexpr char kNoiseMagic[8] = {'S', 'F', 'N', 'O', 'I', 'S', 'E', '1'};
static_assert(std::endian::native == std::endian::little,
              "noise dump format assumes a little-endian host");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void dump_noise_path(const NoisePath& path, std::ostream& os) {
  os.write(kNoiseMagic, sizeof(kNoiseMagic));
  write_raw<std::uint32_t>(os, 1u);  // version
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(path.steps));
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(path.n_modes));
  write_raw<std::uint32_t>(os, 0u);  // reserved
  write_raw<double>(os, path.dt);
  os.write(reinterpret_cast<const char*>(path.increments.data()),
           static_cast<std::streamsize>(path.increments.size() * sizeof(double)));
}

NoisePath load_noise_path(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kNoiseMagic, sizeof(magic)) != 0)
    throw std::invalid_argument("load_noise_path: bad magic");
  const auto version = read_raw<std::uint32_t>(is);
  if (version != 1u) throw std::invalid_argument("load_noise_path: unsupported version");
  NoisePath path;
  path.steps = static_cast<int>(read_raw<std::uint32_t>(is));
  path.n_modes = static_cast<int>(read_raw<std::uint32_t>(is));
  (void)read_raw<std::uint32_t>(is);
  path.dt = read_raw<double>(is);
  path.increments.resize(static_cast<std::size_t>(path.steps) * path.n_modes);
  is.read(reinterpret_cast<char*>(path.increments.data()),
          static_cast<std::streamsize>(path.increments.size() * sizeof(double)));
  if (!is) throw std::invalid_argument("load_noise_path: truncated payload");
  return path;
}

namespace {

// LS slope of log(values) against log(n) over the upper half of the modes;
// values ~ n^{-q} gives q.
double fit_decay_exponent(const std::vector<double>& values) {
  const int m = static_cast<int>(values.size());
  const int lo = std::max(0, m / 2 - 1);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int n = lo; n < m; ++n) {
    const double x = std::log(static_cast<double>(n + 1));
    const double y = std::log(values[static_cast<std::size_t>(n)]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt < 2) return 0.0;
  const double denom = cnt * sxx - sx * sx;
  if (denom == 0.0) return 0.0;
  return -(cnt * sxy - sx * sy) / denom;
}

double sup_ratio(const ModeSpectrum& s, double t, double exponent, const std::vector<double>& amp) {
  double best = 0.0;
  for (int n = 0; n < s.n_modes(); ++n) {
    const double v = std::exp(-s.lambda[n] * t) * std::pow(s.lambda[n], exponent) /
                     amp[static_cast<std::size_t>(n)];
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

AssumptionReport check_assumptions(const ModeSpectrum& spectrum, double alpha, double kappa1,
                                   double r_hint) {
  spectrum.validate();
  StableParams{alpha, 1.0}.validate();

  AssumptionReport rep;
  rep.alpha = alpha;
  rep.kappa1 = kappa1;

  const int m = spectrum.n_modes();
  for (int n = 0; n < m; ++n) {
    rep.sum_beta_alpha += std::pow(spectrum.beta[n], alpha);
    rep.sum_gamma_alpha += std::pow(spectrum.gamma_coef[n], alpha);
    rep.sum_inv_lambda += 1.0 / spectrum.lambda[n];
  }

  // decay exponents of lambda^{-1}, beta^alpha, gamma^alpha in n
  std::vector<double> beta_a(static_cast<std::size_t>(m)), gamma_a(static_cast<std::size_t>(m)),
      inv_l(static_cast<std::size_t>(m));
  for (int n = 0; n < m; ++n) {
    beta_a[static_cast<std::size_t>(n)] = std::pow(spectrum.beta[n], alpha);
    gamma_a[static_cast<std::size_t>(n)] = std::pow(spectrum.gamma_coef[n], alpha);
    inv_l[static_cast<std::size_t>(n)] = 1.0 / spectrum.lambda[n];
  }
  rep.beta_sum_converges = fit_decay_exponent(beta_a) > 1.0;
  rep.gamma_sum_converges = fit_decay_exponent(gamma_a) > 1.0;
  rep.inv_lambda_sum_converges = fit_decay_exponent(inv_l) > 1.0;

  // beta_n ~ lambda_n^{-r}: fit in log(lambda) unless a hint pins r
  auto fit_r = [&](const std::vector<double>& amp) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int n = 0; n < m; ++n) {
      const double x = std::log(spectrum.lambda[n]);
      const double y = std::log(amp[static_cast<std::size_t>(n)]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double denom = m * sxx - sx * sx;
    return denom == 0.0 ? 0.0 : -(m * sxy - sx * sy) / denom;
  };
  rep.r_beta = (r_hint > 0.0) ? r_hint : fit_r(spectrum.beta);
  rep.r_gamma = (r_hint > 0.0) ? r_hint : fit_r(spectrum.gamma_coef);

  const double r = std::max(rep.r_beta, rep.r_gamma);
  rep.gamma_index = alpha / (alpha * r + 1.0);
  rep.gamma_index_admissible = rep.gamma_index > 1.0 && rep.gamma_index <= alpha;
  rep.kappa1_admissible = kappa1 > 0.0 && kappa1 < 0.5;

  // Envelope Lambda_t <= C t^{-(r+1/alpha)}: the integrals converge near 0 iff
  // the envelope exponent stays below 1.
  const double inv_a = 1.0 / alpha;
  rep.lambda_integral_finite = rep.gamma_index * (r + inv_a) <= 1.0 + 1e-12;
  rep.lambda3_integral_finite = (r + kappa1 + inv_a) < 1.0;

  // Lambda functions on a log-spaced grid, plus grid quadrature of the
  // integrals at lambda = 1 and gamma' = 0.95 * gamma.
  const int grid_n = 48;
  const double t_lo = 1e-4, t_hi = 50.0;
  rep.t_grid.resize(grid_n);
  rep.lambda1.resize(grid_n);
  rep.lambda2.resize(grid_n);
  rep.lambda3.resize(grid_n);
  const double lstep = std::log(t_hi / t_lo) / (grid_n - 1);
  for (int i = 0; i < grid_n; ++i) {
    const double t = t_lo * std::exp(lstep * i);
    rep.t_grid[static_cast<std::size_t>(i)] = t;
    rep.lambda1[static_cast<std::size_t>(i)] = sup_ratio(spectrum, t, inv_a, spectrum.beta);
    rep.lambda2[static_cast<std::size_t>(i)] = sup_ratio(spectrum, t, inv_a, spectrum.gamma_coef);
    rep.lambda3[static_cast<std::size_t>(i)] =
        sup_ratio(spectrum, t, kappa1 + inv_a, spectrum.beta);
  }
  const double gamma_prime = 0.95 * rep.gamma_index;
  double i1 = 0.0, i3 = 0.0;
  for (int i = 0; i + 1 < grid_n; ++i) {
    const double t0 = rep.t_grid[static_cast<std::size_t>(i)];
    const double t1 = rep.t_grid[static_cast<std::size_t>(i + 1)];
    const double lam_mid = std::max(rep.lambda1[static_cast<std::size_t>(i)],
                                    rep.lambda2[static_cast<std::size_t>(i)]);
    const double lam_mid1 = std::max(rep.lambda1[static_cast<std::size_t>(i + 1)],
                                     rep.lambda2[static_cast<std::size_t>(i + 1)]);
    const double f0 = std::exp(-t0) * std::pow(lam_mid, gamma_prime);
    const double f1 = std::exp(-t1) * std::pow(lam_mid1, gamma_prime);
    i1 += 0.5 * (f0 + f1) * (t1 - t0);
    const double g0 = std::exp(-t0) * rep.lambda3[static_cast<std::size_t>(i)];
    const double g1 = std::exp(-t1) * rep.lambda3[static_cast<std::size_t>(i + 1)];
    i3 += 0.5 * (g0 + g1) * (t1 - t0);
  }
  rep.integral_lambda_gamma_prime = i1;
  rep.integral_lambda3 = i3;
  return rep;
}

}  // namespace spdelab
