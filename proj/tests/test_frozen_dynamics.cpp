#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "spdelab/errors.hpp"
#include "spdelab/frozen_dynamics.hpp"
#include "spdelab/spectral_space.hpp"
#include "spdelab/stats.hpp"
#include "test_util.hpp"

using namespace spdelab;

namespace {

std::shared_ptr<const SineTransform> tr8() {
  static auto t = std::make_shared<SineTransform>(8, 16);
  return t;
}

Drift make_kind(const std::string& kind, double ax, double ay) {
  DriftSpec spec;
  spec.kind = kind;
  spec.ax = ax;
  spec.ay = ay;
  return make_drift(spec, tr8());
}

NoisePath frozen_noise(const ModeSpectrum& spec, double dt, int steps, std::uint32_t replica,
                       std::uint64_t master = 42) {
  return generate_noise_path(spec, testutil::kHeatAlpha, NoiseBand::kFast, dt, steps, 1.0,
                             SeedLineage{master, replica, StreamDomain::kFrozenNoise, 0});
}

}  // namespace

TEST_CASE("frozen equation with zero drift is the stochastic convolution") {
  const auto spec = testutil::heat_spectrum();
  const Drift f0 = make_kind("zero", 0, 0);
  const auto noise = frozen_noise(spec, 0.02, 300, 1);
  const auto traj =
      simulate_frozen(spec, SpectralVec::zero(8), SpectralVec::zero(8), f0, 300, noise, 1);
  SpectralVec v = SpectralVec::zero(8);
  StepKernel kernel(spec, 0.02, 1.0);
  for (int k = 0; k < 300; ++k) kernel.advance_nodrift(v.c, noise.row(k));
  CHECK(traj.back().c == v.c);
}

TEST_CASE("frozen moments stay bounded") {
  const auto spec = testutil::heat_spectrum();
  const Drift f = make_kind("sinsin", 1.0, 0.5);
  double mean_early = 0.0, mean_late = 0.0;
  const int steps = 4000;
  for (int r = 0; r < 16; ++r) {
    const auto noise = frozen_noise(spec, 0.02, steps, static_cast<std::uint32_t>(r), 7);
    const auto traj = simulate_frozen(spec, SpectralVec::zero(8), SpectralVec::unit(8, 0), f,
                                      steps, noise, 10);
    const int half = traj.n_saved() / 2;
    for (int i = 0; i < traj.n_saved(); ++i)
      (i < half ? mean_early : mean_late) += traj.states[static_cast<std::size_t>(i)].norm();
  }
  CHECK(mean_late / mean_early < 1.5);  // no growth in t
}

TEST_CASE("pathwise contraction") {
  const auto spec = testutil::heat_spectrum();
  const Drift f = make_kind("sinsin", 1.0, 0.5);  // L_F = 0.5, gap 0.5
  const SpectralVec x = SpectralVec::zero(8);
  SpectralVec y1 = SpectralVec::unit(8, 0);
  SpectralVec y2 = SpectralVec::zero(8);

  SUBCASE("identical starts stay identical") {
    const auto noise = frozen_noise(spec, 0.01, 200, 2);
    const auto rec = contraction_check(spec, x, x, y1, y1, f, 200, noise, 1);
    for (double d : rec.diff_norm) CHECK(d == 0.0);
  }
  SUBCASE("exponential decay at the dissipativity rate") {
    const double dt = 1e-3;
    const int steps = 5000;  // T = 5
    for (std::uint32_t r = 0; r < 8; ++r) {
      const auto noise = frozen_noise(spec, dt, steps, 100 + r);
      const auto rec = contraction_check(spec, x, x, y1, y2, f, steps, noise, steps);
      CHECK(rec.diff_norm.back() <= std::exp(-0.5 * 5.0) * rec.diff_norm.front() * 1.05);
    }
  }
  SUBCASE("linear case is the exact semigroup difference") {
    const Drift f0 = make_kind("zero", 0, 0);
    const auto noise = frozen_noise(spec, 0.05, 40, 3);
    const auto rec = contraction_check(spec, x, x, y1, y2, f0, 40, noise, 40);
    const double expect = semigroup_apply(spec, 2.0, y1 - y2).norm();
    CHECK(rec.diff_norm.back() == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("difference system integrated at dt/10 agrees") {
    // same realized noise at dt and dt/10 via the exact split recursion
    const double dt_fine = 1e-4;
    const int fine_steps = 20000;  // T = 2
    auto fine = frozen_noise(spec, dt_fine, fine_steps, 4);
    const NoisePath coarse = aggregate_steps(fine, spec, 1.0, 10);
    const auto rec_fine = contraction_check(spec, x, x, y1, y2, f, fine_steps, fine, fine_steps);
    const auto rec_coarse =
        contraction_check(spec, x, x, y1, y2, f, fine_steps / 10, coarse, fine_steps / 10);
    CHECK(rec_coarse.diff_norm.back() ==
          doctest::Approx(rec_fine.diff_norm.back()).epsilon(0.01));
  }
  SUBCASE("distinct frozen states leave a residual difference ranking") {
    const Drift fx = make_kind("sinsin", 1.0, 0.5);
    SpectralVec xa = SpectralVec::zero(8);
    SpectralVec xb = 0.5 * SpectralVec::unit(8, 0);
    SpectralVec xc = 2.0 * SpectralVec::unit(8, 0);
    const auto noise = frozen_noise(spec, 0.01, 2000, 5);
    const auto near_rec = contraction_check(spec, xa, xb, y2, y2, fx, 2000, noise, 100);
    const auto far_rec = contraction_check(spec, xa, xc, y2, y2, fx, 2000, noise, 100);
    // long-run difference grows with |x1 - x2|
    CHECK(far_rec.diff_norm.back() > near_rec.diff_norm.back());
  }
}

TEST_CASE("averaged drift estimator") {
  const auto spec = testutil::heat_spectrum();
  const double alpha = testutil::kHeatAlpha;
  SpectralVec x(8);
  x[0] = 0.4;
  x[1] = -0.2;
  const SpectralVec y0 = SpectralVec::zero(8);

  SUBCASE("y-independent drift is returned exactly with zero spread") {
    const Drift b = make_kind("sin_x", 1.0, 0.0);
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    EstimatorConfig cfg;
    cfg.t_burn = 1.0;
    cfg.t_avg = 2.0;
    cfg.dt = 0.02;
    cfg.n_replicas = 4;
    const auto est = estimate_averaged_drift(spec, alpha, x, b, f, y0, cfg, 11);
    const auto direct = b.eval(x);
    for (int n = 0; n < 8; ++n) {
      CHECK(est.value[n] == doctest::Approx(direct[n]).epsilon(1e-11));
      CHECK(est.stderr_mode[static_cast<std::size_t>(n)] == 0.0);
    }
    CHECK(est.reliable);
  }
  SUBCASE("linear frozen law makes a sin observable average to zero") {
    const Drift b = make_kind("sin_y", 0.0, 1.0);
    const Drift f = make_kind("zero", 0, 0);
    EstimatorConfig cfg;
    cfg.t_burn = 10.0;
    cfg.t_avg = 50.0;
    cfg.dt = 0.02;
    cfg.n_replicas = 8;
    cfg.stderr_tol = 0.2;
    const auto est = estimate_averaged_drift(spec, alpha, x, b, f, y0, cfg, 13);
    CHECK(est.max_stderr > 0.0);
    for (int n = 0; n < 8; ++n)
      CHECK(std::abs(est.value[n]) <=
            4.0 * est.stderr_mode[static_cast<std::size_t>(n)] + 1e-3);
    // the estimate is bounded by the drift bound
    CHECK(est.value.norm() <= b.spec().bound);
  }
  SUBCASE("disjoint seeds agree within the combined spread") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    EstimatorConfig cfg;
    cfg.t_burn = 10.0;
    cfg.t_avg = 40.0;
    cfg.dt = 0.02;
    cfg.n_replicas = 8;
    const auto e1 = estimate_averaged_drift(spec, alpha, x, b, f, y0, cfg, 1001);
    const auto e2 = estimate_averaged_drift(spec, alpha, x, b, f, y0, cfg, 2002);
    for (int n = 0; n < 8; ++n) {
      const double tol = 3.0 * (e1.stderr_mode[static_cast<std::size_t>(n)] +
                                e2.stderr_mode[static_cast<std::size_t>(n)]);
      CHECK(std::abs(e1.value[n] - e2.value[n]) <= tol + 1e-6);
    }
  }
  SUBCASE("window shift invariance after burn-in") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    EstimatorConfig cfg;
    cfg.t_burn = 10.0;
    cfg.t_avg = 40.0;
    cfg.dt = 0.02;
    cfg.n_replicas = 8;
    EstimatorConfig shifted = cfg;
    shifted.t_burn = 18.0;
    const auto e1 = estimate_averaged_drift(spec, alpha, x, b, f, y0, cfg, 3003);
    const auto e2 = estimate_averaged_drift(spec, alpha, x, b, f, y0, shifted, 4004);
    for (int n = 0; n < 8; ++n) {
      const double tol = 3.0 * (e1.stderr_mode[static_cast<std::size_t>(n)] +
                                e2.stderr_mode[static_cast<std::size_t>(n)]);
      CHECK(std::abs(e1.value[n] - e2.value[n]) <= tol + 1e-6);
    }
  }
  SUBCASE("doubling replicas shrinks the spread like one over sqrt two") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    EstimatorConfig cfg;
    cfg.t_burn = 5.0;
    cfg.t_avg = 20.0;
    cfg.dt = 0.02;
    cfg.n_replicas = 16;
    EstimatorConfig half = cfg;
    half.n_replicas = 8;
    const auto e16 = estimate_averaged_drift(spec, alpha, x, b, f, y0, cfg, 5005);
    const auto e8 = estimate_averaged_drift(spec, alpha, x, b, f, y0, half, 5005);
    double s16 = 0.0, s8 = 0.0;
    for (int n = 0; n < 8; ++n) {
      s16 += e16.stderr_mode[static_cast<std::size_t>(n)];
      s8 += e8.stderr_mode[static_cast<std::size_t>(n)];
    }
    const double ratio = s16 / s8;
    CHECK(ratio >= 1.0 / std::sqrt(2.0) - 0.15);
    CHECK(ratio <= 1.0 / std::sqrt(2.0) + 0.15);
  }
}

TEST_CASE("mixing decay table") {
  const auto spec = testutil::heat_spectrum();
  const double alpha = testutil::kHeatAlpha;
  const SpectralVec x = SpectralVec::zero(8);

  SUBCASE("constant observable has zero gap") {
    const Observable phi(ObservableSpec{"const", 0, 0.37, 1.0});
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    std::vector<SpectralVec> ys{SpectralVec::zero(8)};
    std::vector<double> ts{0.5, 1.0};
    const auto table = mixing_check(spec, alpha, x, phi, ys, ts, f, 0.02, 16, 21);
    CHECK(table.long_run == doctest::Approx(0.37));
    for (const auto& row : table.rows) CHECK(row.gap == doctest::Approx(0.0));
  }
  SUBCASE("linear frozen dynamics mix a sin observable") {
    const Observable phi(ObservableSpec{"sin_mode", 0, 1.0, 1.0});
    const Drift f0 = make_kind("zero", 0, 0);
    std::vector<SpectralVec> ys{SpectralVec::zero(8)};
    std::vector<double> ts{1.0, 2.0, 5.0, 10.0};
    const auto table = mixing_check(spec, alpha, x, phi, ys, ts, f0, 0.01, 192, 22);
    const auto& last = table.rows.back();
    CHECK(last.t == 10.0);
    CHECK(last.gap <= 3.0 * (last.stderr_value + table.long_run_stderr) + 1e-6);
  }
  SUBCASE("farther starts open a larger initial gap") {
    const Observable phi(ObservableSpec{"sin_mode", 0, 1.0, 1.0});
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    std::vector<SpectralVec> ys{SpectralVec::zero(8), 2.0 * SpectralVec::unit(8, 0)};
    std::vector<double> ts{0.2, 6.0};
    const auto table = mixing_check(spec, alpha, x, phi, ys, ts, f, 0.01, 256, 23);
    double near_gap = 0, far_gap = 0;
    for (const auto& row : table.rows) {
      if (row.t == 0.2 && row.y_index == 0) near_gap = row.gap;
      if (row.t == 0.2 && row.y_index == 1) far_gap = row.gap;
    }
    CHECK(far_gap > near_gap);
  }
}

TEST_CASE("holder probe") {
  const auto spec = testutil::heat_spectrum();
  const double alpha = testutil::kHeatAlpha;
  const SpectralVec y0 = SpectralVec::zero(8);
  EstimatorConfig cfg;
  cfg.t_burn = 5.0;
  cfg.t_avg = 20.0;
  cfg.dt = 0.02;
  cfg.n_replicas = 8;

  SUBCASE("identical states differ only by estimator noise") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    SpectralVec x = 0.3 * SpectralVec::unit(8, 0);
    std::vector<std::pair<SpectralVec, SpectralVec>> pairs{{x, x}};
    const auto table = averaged_drift_holder_probe(spec, alpha, pairs, b, f, y0, cfg, 31);
    CHECK(table.rows[0].dx == 0.0);
    CHECK(table.rows[0].dbar <= 2.0 * table.rows[0].stderr_sum + 1e-6);
  }
  SUBCASE("x-independent F: shared invariant run reproduces the difference") {
    // with F free of x the frozen law is shared, so estimating both states on
    // the same substream makes the difference exactly the single-run average
    // of B(x1, Y) - B(x2, Y)
    const Drift b = make_kind("sincos", 1.0, 1.0);
    const Drift f = make_kind("sin_y", 0.0, 0.5);
    SpectralVec x1 = 0.3 * SpectralVec::unit(8, 0);
    SpectralVec x2 = 0.9 * SpectralVec::unit(8, 1);
    const auto e1 = estimate_averaged_drift(spec, alpha, x1, b, f, y0, cfg, 606);
    const auto e2 = estimate_averaged_drift(spec, alpha, x2, b, f, y0, cfg, 606);
    // oracle: accumulate the B difference along one shared frozen run
    const int n_burn = static_cast<int>(std::llround(cfg.t_burn / cfg.dt));
    const int n_avg = static_cast<int>(std::llround(cfg.t_avg / cfg.dt));
    SpectralVec acc = SpectralVec::zero(8);
    for (int r = 0; r < cfg.n_replicas; ++r) {
      const auto noise =
          generate_noise_path(spec, alpha, NoiseBand::kFast, cfg.dt, n_burn + n_avg, 1.0,
                              SeedLineage{606, static_cast<std::uint32_t>(r),
                                          StreamDomain::kEstimator, 0});
      const auto traj = simulate_frozen(spec, x1, y0, f, n_burn + n_avg - 1, noise, 1);
      Drift::Scratch scratch;
      SpectralVec b1(8), b2(8);
      for (int k = n_burn; k < n_burn + n_avg; ++k) {
        b.eval(x1, traj.states[static_cast<std::size_t>(k)], b1, scratch);
        b.eval(x2, traj.states[static_cast<std::size_t>(k)], b2, scratch);
        for (int n = 0; n < 8; ++n) acc[n] += b1[n] - b2[n];
      }
    }
    for (int n = 0; n < 8; ++n) acc[n] /= static_cast<double>(cfg.n_replicas) * n_avg;
    const SpectralVec diff = e1.value - e2.value;
    for (int n = 0; n < 8; ++n) CHECK(diff[n] == doctest::Approx(acc[n]).epsilon(1e-10));
  }
  SUBCASE("y-independent drift reproduces the direct difference") {
    const Drift b = make_kind("sin_x", 1.0, 0.0);
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    SpectralVec x1 = 0.3 * SpectralVec::unit(8, 0);
    SpectralVec x2 = 0.8 * SpectralVec::unit(8, 0);
    std::vector<std::pair<SpectralVec, SpectralVec>> pairs{{x1, x2}};
    const auto table = averaged_drift_holder_probe(spec, alpha, pairs, b, f, y0, cfg, 32);
    CHECK(table.rows[0].dbar == doctest::Approx(dist(b.eval(x1), b.eval(x2))).epsilon(1e-10));
  }
}

TEST_CASE("cached key-seeded estimator") {
  const auto spec = testutil::heat_spectrum();
  const double alpha = testutil::kHeatAlpha;
  const Drift b = make_kind("sincos", 1.0, 1.0);
  const Drift f = make_kind("sinsin", 1.0, 0.5);
  const SpectralVec y0 = SpectralVec::zero(8);
  EstimatorConfig cfg;
  cfg.t_burn = 2.0;
  cfg.t_avg = 5.0;
  cfg.dt = 0.02;
  cfg.n_replicas = 2;
  cfg.stderr_tol = 10.0;

  SUBCASE("identical quantized states hit the cache with identical values") {
    BbarEstimator est(spec, alpha, b, f, y0, cfg, 42);
    SpectralVec x = 0.25 * SpectralVec::unit(8, 0);
    SpectralVec x_jitter = x;
    x_jitter[0] += 2e-4;  // below the quantization step
    const auto v1 = est.evaluate(x);
    const auto v2 = est.evaluate(x_jitter);
    CHECK(v1.c == v2.c);
    CHECK(est.calls() == 2);
    CHECK(est.cache_hits() == 1);
  }
  SUBCASE("values do not depend on visit order") {
    SpectralVec xa = 0.25 * SpectralVec::unit(8, 0);
    SpectralVec xb = 0.50 * SpectralVec::unit(8, 1);
    BbarEstimator e1(spec, alpha, b, f, y0, cfg, 42);
    BbarEstimator e2(spec, alpha, b, f, y0, cfg, 42);
    const auto a1 = e1.evaluate(xa);
    const auto b1 = e1.evaluate(xb);
    const auto b2 = e2.evaluate(xb);
    const auto a2 = e2.evaluate(xa);
    CHECK(a1.c == a2.c);
    CHECK(b1.c == b2.c);
  }
  SUBCASE("unreliable estimates abort with the offending state recorded") {
    EstimatorConfig strict = cfg;
    strict.stderr_tol = 1e-9;
    BbarEstimator est(spec, alpha, b, f, y0, strict, 42);
    SpectralVec x = 0.25 * SpectralVec::unit(8, 0);
    CHECK_THROWS_AS(est.evaluate(x), NumericalError);
    CHECK(est.last_offending().c == x.c);
  }
}
