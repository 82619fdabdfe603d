#include "spdelab/frozen_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spdelab/errors.hpp"
#include "spdelab/stats.hpp"

namespace spdelab {

Trajectory simulate_frozen(const ModeSpectrum& spectrum, const SpectralVec& x,
                           const SpectralVec& y0, const Drift& f, int n_steps,
                           const NoisePath& noise, int save_stride) {
  check_dissipativity(spectrum, f);
  Drift::Scratch scratch;
  DriftField field = [&](const SpectralVec& v, double, SpectralVec& out) {
    f.eval(x, v, out, scratch);
  };
  return integrate(spectrum, y0, field, n_steps, noise, 1.0, save_stride);
}

ContractionRecord contraction_check(const ModeSpectrum& spectrum, const SpectralVec& x1,
                                    const SpectralVec& x2, const SpectralVec& y1,
                                    const SpectralVec& y2, const Drift& f, int n_steps,
                                    const NoisePath& noise, int save_stride) {
  check_dissipativity(spectrum, f);
  if (noise.steps < n_steps)
    throw std::invalid_argument("contraction_check: noise path too short");
  StepKernel kernel(spectrum, noise.dt, 1.0);
  SpectralVec a = y1, bvec = y2;
  SpectralVec ga(static_cast<std::size_t>(spectrum.n_modes())), gb = ga;
  Drift::Scratch scratch;

  ContractionRecord rec;
  rec.times.push_back(0.0);
  rec.diff_norm.push_back(dist(a, bvec));
  for (int k = 0; k < n_steps; ++k) {
    f.eval(x1, a, ga, scratch);
    f.eval(x2, bvec, gb, scratch);
    kernel.advance(a.c, ga.c, noise.row(k));
    kernel.advance(bvec.c, gb.c, noise.row(k));
    if ((k + 1) % save_stride == 0 || k + 1 == n_steps) {
      rec.times.push_back((k + 1) * noise.dt);
      rec.diff_norm.push_back(dist(a, bvec));
    }
  }
  return rec;
}

void EstimatorConfig::validate() const {
  if (!(t_burn > 0.0) || !(t_avg > 0.0)) throw std::invalid_argument("estimator: t_burn and t_avg must be > 0");
  if (!(dt > 0.0)) throw std::invalid_argument("estimator: dt must be > 0");
  if (n_replicas < 2) throw std::invalid_argument("estimator: need at least 2 replicas for a spread");
  if (!(quant_step > 0.0)) throw std::invalid_argument("estimator: quant_step must be > 0");
}

namespace {

// One replica window average of B(x, Y_s); noise buffer reused by the caller.
void window_average(const ModeSpectrum& spectrum, const SpectralVec& x, const Drift& b,
                    const Drift& f, const SpectralVec& y0, int n_burn, int n_avg,
                    const NoisePath& noise, SpectralVec& mean_out) {
  StepKernel kernel(spectrum, noise.dt, 1.0);
  const int m = spectrum.n_modes();
  SpectralVec y = y0;
  SpectralVec g(static_cast<std::size_t>(m)), bval(static_cast<std::size_t>(m));
  Drift::Scratch scratch;
  mean_out.c.assign(static_cast<std::size_t>(m), 0.0);
  int k = 0;
  for (; k < n_burn; ++k) {
    f.eval(x, y, g, scratch);
    kernel.advance(y.c, g.c, noise.row(k));
  }
  for (int j = 0; j < n_avg; ++j, ++k) {
    b.eval(x, y, bval, scratch);
    for (int n = 0; n < m; ++n) mean_out[n] += bval[n];
    f.eval(x, y, g, scratch);
    kernel.advance(y.c, g.c, noise.row(k));
  }
  for (int n = 0; n < m; ++n) mean_out[n] /= static_cast<double>(n_avg);
}

}  // namespace

AveragedDriftEstimate estimate_averaged_drift(const ModeSpectrum& spectrum, double alpha,
                                              const SpectralVec& x, const Drift& b,
                                              const Drift& f, const SpectralVec& y0,
                                              const EstimatorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_dissipativity(spectrum, f);
  const int m = spectrum.n_modes();
  const int n_burn = static_cast<int>(std::llround(cfg.t_burn / cfg.dt));
  const int n_avg = static_cast<int>(std::llround(cfg.t_avg / cfg.dt));

  std::vector<SpectralVec> replica_means(static_cast<std::size_t>(cfg.n_replicas));
  NoisePath noise;
  for (int r = 0; r < cfg.n_replicas; ++r) {
    SeedLineage lineage{seed, static_cast<std::uint32_t>(r), StreamDomain::kEstimator, 0};
    regenerate_noise_path(noise, spectrum, alpha, NoiseBand::kFast, cfg.dt, n_burn + n_avg, 1.0,
                          lineage);
    window_average(spectrum, x, b, f, y0, n_burn, n_avg, noise,
                   replica_means[static_cast<std::size_t>(r)]);
  }

  AveragedDriftEstimate est;
  est.t_burn = cfg.t_burn;
  est.t_avg = cfg.t_avg;
  est.n_replicas = cfg.n_replicas;
  est.value = SpectralVec(static_cast<std::size_t>(m));
  est.stderr_mode.assign(static_cast<std::size_t>(m), 0.0);
  std::vector<double> per_mode(static_cast<std::size_t>(cfg.n_replicas));
  for (int n = 0; n < m; ++n) {
    double mean = 0.0;
    for (int r = 0; r < cfg.n_replicas; ++r) {
      per_mode[static_cast<std::size_t>(r)] = replica_means[static_cast<std::size_t>(r)][n];
      mean += per_mode[static_cast<std::size_t>(r)];
    }
    est.value[n] = mean / cfg.n_replicas;
    est.stderr_mode[static_cast<std::size_t>(n)] = iqr_stderr(per_mode);
  }
  est.max_stderr = *std::max_element(est.stderr_mode.begin(), est.stderr_mode.end());
  est.reliable = est.max_stderr <= cfg.stderr_tol;
  return est;
}

MixingTable mixing_check(const ModeSpectrum& spectrum, double alpha, const SpectralVec& x,
                         const Observable& phi, std::span<const SpectralVec> ys,
                         std::span<const double> t_grid, const Drift& f, double dt,
                         int n_replicas, std::uint64_t seed) {
  check_dissipativity(spectrum, f);
  if (ys.empty() || t_grid.empty()) throw std::invalid_argument("mixing_check: empty grids");
  const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
  const int n_steps = static_cast<int>(std::llround(t_max / dt));
  std::vector<int> grid_steps;
  for (double t : t_grid) grid_steps.push_back(static_cast<int>(std::llround(t / dt)));

  MixingTable table;

  // long-run average over a burnt-in window, several replicas
  {
    const double lf = f.spec().lipschitz_in_y;
    const double rate = spectrum.lambda[0] - lf;
    const double t_burn = 10.0 / rate;
    const double t_avg = std::max(20.0 / rate, 4.0 * t_max);
    const int n_burn = static_cast<int>(std::llround(t_burn / dt));
    const int n_avg = static_cast<int>(std::llround(t_avg / dt));
    const int reps = 8;
    std::vector<double> window_means(reps);
    NoisePath noise;
    StepKernel kernel(spectrum, dt, 1.0);
    Drift::Scratch scratch;
    SpectralVec g(static_cast<std::size_t>(spectrum.n_modes()));
    for (int r = 0; r < reps; ++r) {
      SeedLineage lineage{seed, static_cast<std::uint32_t>(r), StreamDomain::kMixing, 1u << 16};
      regenerate_noise_path(noise, spectrum, alpha, NoiseBand::kFast, dt, n_burn + n_avg, 1.0,
                            lineage);
      SpectralVec y = SpectralVec::zero(spectrum.n_modes());
      double acc = 0.0;
      for (int k = 0; k < n_burn + n_avg; ++k) {
        if (k >= n_burn) acc += phi.eval(y);
        f.eval(x, y, g, scratch);
        kernel.advance(y.c, g.c, noise.row(k));
      }
      window_means[static_cast<std::size_t>(r)] = acc / n_avg;
    }
    double mean = 0.0;
    for (double v : window_means) mean += v;
    table.long_run = mean / reps;
    table.long_run_stderr = iqr_stderr(window_means);
  }

  // P^x_t phi(y) by plain ensemble average per start point
  StepKernel kernel(spectrum, dt, 1.0);
  Drift::Scratch scratch;
  SpectralVec g(static_cast<std::size_t>(spectrum.n_modes()));
  NoisePath noise;
  std::vector<std::vector<double>> samples(t_grid.size(),
                                           std::vector<double>(static_cast<std::size_t>(n_replicas)));
  for (int yi = 0; yi < static_cast<int>(ys.size()); ++yi) {
    for (int r = 0; r < n_replicas; ++r) {
      SeedLineage lineage{seed, static_cast<std::uint32_t>(r), StreamDomain::kMixing,
                          static_cast<std::uint32_t>(yi)};
      regenerate_noise_path(noise, spectrum, alpha, NoiseBand::kFast, dt, n_steps, 1.0, lineage);
      SpectralVec y = ys[static_cast<std::size_t>(yi)];
      std::size_t gi = 0;
      for (int k = 0; k <= n_steps; ++k) {
        while (gi < grid_steps.size() && grid_steps[gi] == k) {
          samples[gi][static_cast<std::size_t>(r)] = phi.eval(y);
          ++gi;
        }
        if (k == n_steps) break;
        f.eval(x, y, g, scratch);
        kernel.advance(y.c, g.c, noise.row(k));
      }
    }
    for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
      MixingRow row;
      row.y_index = yi;
      row.t = t_grid[gi];
      double mean = 0.0;
      for (double v : samples[gi]) mean += v;
      row.value = mean / n_replicas;
      row.stderr_value = iqr_stderr(samples[gi]);
      row.gap = std::abs(row.value - table.long_run);
      table.rows.push_back(row);
    }
  }

  // decay rate fitted on the first start point
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const MixingRow& row : table.rows) {
      if (row.y_index != 0) continue;
      const double gap = std::max(row.gap, 1e-12);
      sx += row.t;
      sy += std::log(gap);
      sxx += row.t * row.t;
      sxy += row.t * std::log(gap);
      ++cnt;
    }
    if (cnt >= 2) {
      const double denom = cnt * sxx - sx * sx;
      if (denom != 0.0) table.fitted_rate = -(cnt * sxy - sx * sy) / denom;
    }
  }
  return table;
}

HolderProbeTable averaged_drift_holder_probe(
    const ModeSpectrum& spectrum, double alpha,
    std::span<const std::pair<SpectralVec, SpectralVec>> x_pairs, const Drift& b, const Drift& f,
    const SpectralVec& y0, const EstimatorConfig& cfg, std::uint64_t seed) {
  HolderProbeTable table;
  for (std::size_t i = 0; i < x_pairs.size(); ++i) {
    const auto& [x1, x2] = x_pairs[i];
    const auto e1 =
        estimate_averaged_drift(spectrum, alpha, x1, b, f, y0, cfg, mix64(seed ^ (2 * i)));
    const auto e2 =
        estimate_averaged_drift(spectrum, alpha, x2, b, f, y0, cfg, mix64(seed ^ (2 * i + 1)));
    HolderProbeRow row;
    row.dx = dist(x1, x2);
    row.dbar = dist(e1.value, e2.value);
    row.stderr_sum = e1.max_stderr + e2.max_stderr;
    table.rows.push_back(row);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (const auto& row : table.rows) {
    if (row.dx <= 0.0 || row.dbar <= 0.0) continue;
    const double lx = std::log(row.dx), ly = std::log(row.dbar);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt >= 2) {
    const double denom = cnt * sxx - sx * sx;
    if (denom != 0.0) table.fitted_slope = (cnt * sxy - sx * sy) / denom;
  }
  return table;
}

BbarEstimator::BbarEstimator(const ModeSpectrum& spectrum, double alpha, const Drift& b,
                             const Drift& f, const SpectralVec& y0, EstimatorConfig cfg,
                             std::uint64_t master_seed)
    : spectrum_(spectrum),
      alpha_(alpha),
      b_(b),
      f_(f),
      y0_(y0),
      cfg_(std::move(cfg)),
      master_seed_(master_seed) {
  cfg_.validate();
  check_dissipativity(spectrum_, f_);
}

std::vector<std::int64_t> BbarEstimator::quantize(const SpectralVec& x) const {
  std::vector<std::int64_t> key(static_cast<std::size_t>(x.size()));
  for (int n = 0; n < x.size(); ++n)
    key[static_cast<std::size_t>(n)] = static_cast<std::int64_t>(std::llround(x[n] / cfg_.quant_step));
  return key;
}

std::size_t BbarEstimator::KeyHash::operator()(const std::vector<std::int64_t>& k) const {
  std::uint64_t h = 0x5bd1e9955bd1e995ULL;
  for (std::int64_t v : k) h = mix64(h ^ static_cast<std::uint64_t>(v));
  return static_cast<std::size_t>(h);
}

SpectralVec BbarEstimator::evaluate(const SpectralVec& x) {
  const auto key = quantize(x);
  {
    std::lock_guard lock(mutex_);
    ++calls_;
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      ++hits_;
      return it->second;
    }
  }
  // substream derived from the key alone: identical states give identical
  // estimates regardless of visit order or thread schedule
  std::uint64_t key_seed = mix64(master_seed_ ^ 0xb0a5e57a11ull);
  for (std::int64_t v : key) key_seed = mix64(key_seed ^ static_cast<std::uint64_t>(v));

  // evaluate at the quantized representative so cache key and input agree
  SpectralVec xq(static_cast<std::size_t>(x.size()));
  for (int n = 0; n < x.size(); ++n)
    xq[n] = static_cast<double>(key[static_cast<std::size_t>(n)]) * cfg_.quant_step;

  const auto est = estimate_averaged_drift(spectrum_, alpha_, xq, b_, f_, y0_, cfg_, key_seed);
  if (!est.reliable) {
    {
      std::lock_guard lock(mutex_);
      offending_ = x;
    }
    std::ostringstream oss;
    oss << "averaged-drift estimate unreliable (max stderr " << est.max_stderr << " > tol "
        << cfg_.stderr_tol << ") at state [";
    for (int n = 0; n < x.size(); ++n) oss << (n ? "," : "") << x[n];
    oss << "]";
    throw NumericalError(oss.str());
  }
  {
    std::lock_guard lock(mutex_);
    cache_.emplace(key, est.value);
    stderr_sum_ += est.max_stderr;
    ++stderr_count_;
  }
  return est.value;
}

double BbarEstimator::mean_stderr() const {
  std::lock_guard lock(mutex_);
  return stderr_count_ == 0 ? 0.0 : stderr_sum_ / static_cast<double>(stderr_count_);
}

}  // namespace spdelab
