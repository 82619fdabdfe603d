#include "spdelab/averaging_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spdelab/errors.hpp"
#include "spdelab/parallel.hpp"
#include "spdelab/stats.hpp"

namespace spdelab {

void SlowFastConfig::validate() const {
  spectrum.validate();
  StableParams{alpha, 1.0}.validate();
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("slow-fast: epsilon must lie in (0, 1]");
  if (!(T > 0.0)) throw std::invalid_argument("slow-fast: T must be > 0");
  if (!(dt_macro > 0.0)) throw std::invalid_argument("slow-fast: dt_macro must be > 0");
  if (x0.size() != spectrum.n_modes() || y0.size() != spectrum.n_modes())
    throw std::invalid_argument("slow-fast: initial states must match n_modes");
  const double d = resolved_delta();
  if (d < dt_macro - 1e-12 || d > T + 1e-12)
    throw std::invalid_argument("slow-fast: need dt_macro <= delta <= T");
}

int SlowFastConfig::n_macro_steps() const {
  // degenerate dt_macro > T collapses to a single step of size T
  if (dt_macro >= T) return 1;
  return static_cast<int>(std::llround(T / dt_macro));
}

int SlowFastConfig::n_micro() const {
  const double dt = dt_macro >= T ? T : dt_macro;
  return std::max(1, static_cast<int>(std::ceil(micro_kappa * dt / epsilon)));
}

double SlowFastConfig::resolved_delta() const {
  if (delta > 0.0) return delta;
  const double raw = std::sqrt(epsilon);
  const double dt = dt_macro >= T ? T : dt_macro;
  const double multiples = std::max(1.0, std::round(raw / dt));
  return std::min(multiples * dt, T);
}

NoisePath SlowFastConfig::make_slow_noise() const {
  const double dt = dt_macro >= T ? T : dt_macro;
  return generate_noise_path(spectrum, alpha, NoiseBand::kSlow, dt, n_macro_steps(), 1.0,
                             SeedLineage{master_seed, replica, StreamDomain::kSlowNoise, 0},
                             memory_budget_bytes);
}

NoisePath SlowFastConfig::make_fast_noise() const {
  const int total = n_macro_steps() * n_micro();
  const std::size_t bytes =
      static_cast<std::size_t>(total) * static_cast<std::size_t>(spectrum.n_modes()) * sizeof(double);
  if (bytes > memory_budget_bytes)
    throw ResourceError("epsilon = " + std::to_string(epsilon) + " requires " +
                        std::to_string(total) + " fast micro-steps (" + std::to_string(bytes) +
                        " bytes) which exceeds the memory budget of " +
                        std::to_string(memory_budget_bytes) + " bytes");
  return generate_noise_path(spectrum, alpha, NoiseBand::kFast, dt_micro(), total, epsilon,
                             SeedLineage{master_seed, replica, StreamDomain::kFastNoise, fast_stream},
                             memory_budget_bytes);
}

SlowFastResult run_slow_fast(const SlowFastConfig& cfg, const Drift& b, const Drift& f,
                             const NoisePath& slow_noise, const NoisePath& fast_noise) {
  cfg.validate();
  check_dissipativity(cfg.spectrum, f);
  const int n_macro = cfg.n_macro_steps();
  const int n_micro = cfg.n_micro();
  if (slow_noise.steps < n_macro) throw std::invalid_argument("run_slow_fast: slow noise too short");
  if (fast_noise.steps < n_macro * n_micro)
    throw std::invalid_argument("run_slow_fast: fast noise too short");

  const int m = cfg.spectrum.n_modes();
  StepKernel slow_kernel(cfg.spectrum, slow_noise.dt, 1.0);
  StepKernel fast_kernel(cfg.spectrum, fast_noise.dt, 1.0 / cfg.epsilon);

  SpectralVec x = cfg.x0, y = cfg.y0;
  SpectralVec bval(static_cast<std::size_t>(m)), fval(static_cast<std::size_t>(m));
  Drift::Scratch scratch;

  SlowFastResult res;
  res.x.dt = res.y.dt = slow_noise.dt;
  res.x.times.push_back(0.0);
  res.y.times.push_back(0.0);
  res.x.states.push_back(x);
  res.y.states.push_back(y);

  for (int k = 0; k < n_macro; ++k) {
    b.eval(x, y, bval, scratch);  // left point in both arguments
    for (int j = 0; j < n_micro; ++j) {
      f.eval(x, y, fval, scratch);
      fast_kernel.advance(y.c, fval.c, fast_noise.row(k * n_micro + j));
    }
    slow_kernel.advance(x.c, bval.c, slow_noise.row(k));
    res.x.times.push_back((k + 1) * slow_noise.dt);
    res.y.times.push_back((k + 1) * slow_noise.dt);
    res.x.states.push_back(x);
    res.y.states.push_back(y);
  }
  return res;
}

SlowFastResult run_slow_fast(const SlowFastConfig& cfg, const Drift& b, const Drift& f) {
  cfg.validate();
  const NoisePath slow = cfg.make_slow_noise();
  const NoisePath fast = cfg.make_fast_noise();
  return run_slow_fast(cfg, b, f, slow, fast);
}

namespace {

template <typename BbarFn>
Trajectory run_averaged_impl(const SlowFastConfig& cfg, BbarFn&& bbar, const NoisePath& slow_noise) {
  cfg.validate();
  const int n_macro = cfg.n_macro_steps();
  if (slow_noise.steps < n_macro) throw std::invalid_argument("run_averaged: slow noise too short");
  StepKernel kernel(cfg.spectrum, slow_noise.dt, 1.0);
  SpectralVec x = cfg.x0;
  Trajectory traj;
  traj.dt = slow_noise.dt;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  for (int k = 0; k < n_macro; ++k) {
    const SpectralVec g = bbar(x);
    kernel.advance(x.c, g.c, slow_noise.row(k));
    traj.times.push_back((k + 1) * slow_noise.dt);
    traj.states.push_back(x);
  }
  return traj;
}

}  // namespace

Trajectory run_averaged(const SlowFastConfig& cfg, BbarEstimator& bbar,
                        const NoisePath& slow_noise) {
  return run_averaged_impl(cfg, [&](const SpectralVec& x) { return bbar.evaluate(x); },
                           slow_noise);
}

Trajectory run_averaged(const SlowFastConfig& cfg, const Drift& bbar_closed_form,
                        const NoisePath& slow_noise) {
  if (!bbar_closed_form.spec().y_independent)
    throw std::invalid_argument("run_averaged: closed-form drift must be y-independent");
  return run_averaged_impl(cfg, [&](const SpectralVec& x) { return bbar_closed_form.eval(x); },
                           slow_noise);
}

Trajectory khasminskii_auxiliary(const SlowFastConfig& cfg, const Drift& f,
                                 const Trajectory& x_macro, const NoisePath& fast_noise) {
  cfg.validate();
  check_dissipativity(cfg.spectrum, f);
  const int n_macro = cfg.n_macro_steps();
  const int n_micro = cfg.n_micro();
  if (x_macro.n_saved() < n_macro + 1)
    throw std::invalid_argument("khasminskii_auxiliary: macro path too short");
  if (fast_noise.steps < n_macro * n_micro)
    throw std::invalid_argument("khasminskii_auxiliary: fast noise too short");
  const double delta = cfg.resolved_delta();
  const double ratio = delta / cfg.dt_macro;
  if (std::abs(ratio - std::round(ratio)) > 1e-9)
    throw std::invalid_argument("khasminskii_auxiliary: delta must be a multiple of dt_macro");
  const int block = std::max(1, static_cast<int>(std::llround(ratio)));

  StepKernel fast_kernel(cfg.spectrum, fast_noise.dt, 1.0 / cfg.epsilon);
  SpectralVec yhat = cfg.y0;
  SpectralVec fval(static_cast<std::size_t>(cfg.spectrum.n_modes()));
  Drift::Scratch scratch;

  Trajectory traj;
  traj.dt = cfg.dt_macro;
  traj.times.push_back(0.0);
  traj.states.push_back(yhat);
  for (int k = 0; k < n_macro; ++k) {
    const int anchor = (k / block) * block;  // s(delta) on the macro grid
    const SpectralVec& x_frozen = x_macro.states[static_cast<std::size_t>(anchor)];
    for (int j = 0; j < n_micro; ++j) {
      f.eval(x_frozen, yhat, fval, scratch);
      fast_kernel.advance(yhat.c, fval.c, fast_noise.row(k * n_micro + j));
    }
    traj.times.push_back((k + 1) * cfg.dt_macro);
    traj.states.push_back(yhat);
  }
  return traj;
}

KhasminskiiProbe khasminskii_delta_probe(const SlowFastConfig& base, const Drift& b,
                                         const Drift& f, std::span<const double> deltas,
                                         int n_replicas, int jobs) {
  if (deltas.empty()) throw std::invalid_argument("khasminskii_delta_probe: no deltas");
  KhasminskiiProbe probe;
  probe.deltas.assign(deltas.begin(), deltas.end());
  probe.integrals.assign(deltas.size(), std::vector<double>(static_cast<std::size_t>(n_replicas)));

  parallel_for_index(n_replicas, jobs, [&](int r) {
    SlowFastConfig cfg = base;
    cfg.replica = static_cast<std::uint32_t>(r);
    cfg.validate();
    const NoisePath slow = cfg.make_slow_noise();
    const NoisePath fast = cfg.make_fast_noise();
    const SlowFastResult sf = run_slow_fast(cfg, b, f, slow, fast);

    const int n_macro = cfg.n_macro_steps();
    const int n_micro = cfg.n_micro();
    StepKernel fast_kernel(cfg.spectrum, fast.dt, 1.0 / cfg.epsilon);
    Drift::Scratch scratch;
    const int m = cfg.spectrum.n_modes();

    for (std::size_t d = 0; d < deltas.size(); ++d) {
      const double delta = deltas[d];
      const double ratio = delta / cfg.dt_macro;
      if (std::abs(ratio - std::round(ratio)) > 1e-9)
        throw std::invalid_argument("khasminskii_delta_probe: delta must be a multiple of dt_macro");
      const int block = std::max(1, static_cast<int>(std::llround(ratio)));

      // Y and Yhat advanced jointly on the micro grid with the shared noise;
      // |Y - Yhat| accumulated as a left-point Riemann sum.
      SpectralVec y = cfg.y0, yhat = cfg.y0;
      SpectralVec fy(static_cast<std::size_t>(m)), fh(static_cast<std::size_t>(m));
      double integral = 0.0;
      for (int k = 0; k < n_macro; ++k) {
        const SpectralVec& x_now = sf.x.states[static_cast<std::size_t>(k)];
        const SpectralVec& x_anchor = sf.x.states[static_cast<std::size_t>((k / block) * block)];
        for (int j = 0; j < n_micro; ++j) {
          integral += dist(y, yhat) * fast.dt;
          f.eval(x_now, y, fy, scratch);
          f.eval(x_anchor, yhat, fh, scratch);
          const auto row = fast.row(k * n_micro + j);
          fast_kernel.advance(y.c, fy.c, row);
          fast_kernel.advance(yhat.c, fh.c, row);
        }
      }
      probe.integrals[d][static_cast<std::size_t>(r)] = integral;
    }
  });

  for (const auto& vals : probe.integrals) {
    std::vector<double> copy = vals;
    probe.medians.push_back(quantile(std::move(copy), 0.5));
  }
  return probe;
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  if (a.n_saved() != b.n_saved())
    throw std::invalid_argument("sup_distance: trajectories on different grids");
  double best = 0.0;
  for (int i = 0; i < a.n_saved(); ++i) {
    if (std::abs(a.times[static_cast<std::size_t>(i)] - b.times[static_cast<std::size_t>(i)]) >
        1e-12)
      throw std::invalid_argument("sup_distance: time grids differ");
    best = std::max(best, dist(a.states[static_cast<std::size_t>(i)],
                               b.states[static_cast<std::size_t>(i)]));
  }
  return best;
}

ErrorReport strong_error(std::span<const double> sup_errors, std::span<const double> p_set,
                         double theta_tilde, double ceiling) {
  if (sup_errors.empty()) throw std::invalid_argument("strong_error: no replicas");
  ErrorReport rep;
  rep.sup_errors.assign(sup_errors.begin(), sup_errors.end());
  std::vector<double> sorted = rep.sup_errors;
  std::sort(sorted.begin(), sorted.end());
  rep.median = quantile_sorted(sorted, 0.5);
  rep.q05 = quantile_sorted(sorted, 0.05);
  rep.q25 = quantile_sorted(sorted, 0.25);
  rep.q75 = quantile_sorted(sorted, 0.75);
  rep.q95 = quantile_sorted(sorted, 0.95);
  rep.p_set.assign(p_set.begin(), p_set.end());
  for (double p : p_set) {
    double acc = 0.0;
    for (double e : sup_errors) acc += std::pow(e, p);
    rep.moments.push_back(acc / static_cast<double>(sup_errors.size()));
  }
  rep.theta_tilde = theta_tilde;
  rep.ceiling = ceiling;
  rep.ceiling_ok = ceiling <= 0.0 || sorted.back() <= ceiling;
  return rep;
}

double nominal_theta_tilde(const DriftSpec& b, const DriftSpec& f, double theta,
                           double theta_prime, double gamma_index) {
  const double eta_b = std::min(b.eta1, b.eta2 * f.eta3);
  const double exponent = std::min(eta_b, gamma_index + theta_prime - 1.0);
  return 0.5 * theta * exponent;
}

void StudyConfig::validate() const {
  base.validate();
  if (epsilons.empty()) throw std::invalid_argument("study: epsilon list is empty");
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    if (!(epsilons[i] < epsilons[i - 1]))
      throw std::invalid_argument("study: epsilon list must be strictly decreasing");
  if (n_replicas < 1) throw std::invalid_argument("study: need at least one replica");
  if (jobs < 1) throw std::invalid_argument("study: jobs must be >= 1");
}

StudyTable convergence_study(const StudyConfig& cfg, const Drift& b, const Drift& f,
                             BbarEstimator& bbar) {
  cfg.validate();
  const std::size_t n_eps = cfg.epsilons.size();
  const int reps = cfg.n_replicas;

  StudyTable table;
  table.theta_tilde =
      nominal_theta_tilde(b.spec(), f.spec(), cfg.theta, cfg.theta_prime, cfg.gamma_index);

  // sup_err[e * reps + r]; empty string in err slot means success
  std::vector<double> sup_err(n_eps * static_cast<std::size_t>(reps), 0.0);
  std::vector<std::string> rep_err(n_eps * static_cast<std::size_t>(reps));
  std::vector<std::string> xbar_err(static_cast<std::size_t>(reps));

  parallel_for_index(reps, cfg.jobs, [&](int r) {
    SlowFastConfig rc = cfg.base;
    rc.replica = static_cast<std::uint32_t>(r);
    const NoisePath slow = rc.make_slow_noise();

    Trajectory xbar;
    try {
      xbar = run_averaged(rc, bbar, slow);
    } catch (const std::exception& e) {
      xbar_err[static_cast<std::size_t>(r)] = e.what();
      return;
    }
    for (std::size_t e = 0; e < n_eps; ++e) {
      try {
        SlowFastConfig ec = rc;
        ec.epsilon = cfg.epsilons[e];
        ec.delta = cfg.fixed_delta;  // 0 -> delta = sqrt(epsilon) per point
        ec.fast_stream = static_cast<std::uint32_t>(e);
        const NoisePath fast = ec.make_fast_noise();
        const SlowFastResult sf = run_slow_fast(ec, b, f, slow, fast);
        sup_err[e * reps + static_cast<std::size_t>(r)] = sup_distance(sf.x, xbar);
      } catch (const std::exception& ex) {
        rep_err[e * reps + static_cast<std::size_t>(r)] = ex.what();
      }
    }
  });

  const double m_b = b.spec().bound;
  const double ceiling =
      2.0 * m_b / cfg.base.spectrum.lambda[0] + 2.0 * m_b * cfg.base.T;

  for (std::size_t e = 0; e < n_eps; ++e) {
    StudyRow row;
    row.epsilon = cfg.epsilons[e];
    {
      SlowFastConfig ec = cfg.base;
      ec.epsilon = cfg.epsilons[e];
      ec.delta = cfg.fixed_delta;
      row.delta = ec.resolved_delta();
    }
    row.replicas = reps;
    row.ok = true;
    for (int r = 0; r < reps && row.ok; ++r) {
      if (!xbar_err[static_cast<std::size_t>(r)].empty()) {
        row.ok = false;
        row.error = "averaged run failed: " + xbar_err[static_cast<std::size_t>(r)];
      } else if (!rep_err[e * reps + static_cast<std::size_t>(r)].empty()) {
        row.ok = false;
        row.error = rep_err[e * reps + static_cast<std::size_t>(r)];
      }
    }
    if (row.ok) {
      std::span<const double> errs(sup_err.data() + e * reps, static_cast<std::size_t>(reps));
      row.report = strong_error(errs, cfg.p_set, table.theta_tilde, ceiling);
    }
    table.rows.push_back(std::move(row));
  }

  // fitted slope over successful rows
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int cnt = 0;
    for (const StudyRow& row : table.rows) {
      if (!row.ok || row.report.median <= 0.0) continue;
      const double lx = std::log(row.epsilon), ly = std::log(row.report.median);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++cnt;
    }
    if (cnt >= 2) {
      const double denom = cnt * sxx - sx * sx;
      if (denom != 0.0) {
        table.fitted_slope = (cnt * sxy - sx * sy) / denom;
        table.have_slope = true;
      }
    }
  }
  table.medians_monotone = true;
  for (std::size_t e = 1; e < table.rows.size(); ++e) {
    if (!table.rows[e].ok || !table.rows[e - 1].ok) {
      table.medians_monotone = false;
      break;
    }
    if (table.rows[e].report.median > table.rows[e - 1].report.median)
      table.medians_monotone = false;
  }
  if (table.rows.size() >= 2 && table.rows.front().ok && table.rows.back().ok)
    table.endpoints_strict = table.rows.back().report.median < table.rows.front().report.median;
  return table;
}

}  // namespace spdelab
