#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "spdelab/averaging_engine.hpp"
#include "spdelab/errors.hpp"
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
  spec.eta1 = 0.9;
  spec.eta2 = 0.9;
  spec.eta3 = 0.9;
  return make_drift(spec, tr8());
}

SlowFastConfig base_config() {
  SlowFastConfig cfg;
  cfg.spectrum = testutil::heat_spectrum();
  cfg.alpha = testutil::kHeatAlpha;
  cfg.x0 = SpectralVec::unit(8, 0);
  cfg.y0 = SpectralVec::zero(8);
  cfg.epsilon = 0.1;
  cfg.T = 0.5;
  cfg.dt_macro = 0.005;
  cfg.master_seed = 42;
  cfg.replica = 0;
  return cfg;
}

EstimatorConfig fast_estimator() {
  EstimatorConfig ec;
  ec.t_burn = 2.0;
  ec.t_avg = 4.0;
  ec.dt = 0.05;
  ec.n_replicas = 2;
  ec.stderr_tol = 10.0;
  return ec;
}

}  // namespace

TEST_CASE("config resolution") {
  SlowFastConfig cfg = base_config();
  SUBCASE("micro step policy keeps dt_fast below epsilon/kappa") {
    cfg.epsilon = 0.004;
    cfg.dt_macro = 0.001;
    CHECK(cfg.dt_micro() <= cfg.epsilon / cfg.micro_kappa + 1e-15);
  }
  SUBCASE("delta defaults to sqrt(epsilon) on the macro grid") {
    cfg.epsilon = 0.1;
    cfg.dt_macro = 0.001;
    const double d = cfg.resolved_delta();
    CHECK(d == doctest::Approx(0.316).epsilon(0.01));
    CHECK(std::abs(d / cfg.dt_macro - std::round(d / cfg.dt_macro)) < 1e-9);
  }
  SUBCASE("degenerate dt_macro > T collapses to one step") {
    cfg.dt_macro = 2.0;
    cfg.T = 0.5;
    CHECK(cfg.n_macro_steps() == 1);
    CHECK(cfg.make_slow_noise().dt == doctest::Approx(0.5));
  }
  SUBCASE("epsilon outside (0,1] is rejected") {
    cfg.epsilon = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}

TEST_CASE("slow equation decouples when B is zero") {
  SlowFastConfig cfg = base_config();
  const Drift b0 = make_kind("zero", 0, 0);
  const Drift f = make_kind("sinsin", 1.0, 0.5);
  const auto res1 = run_slow_fast(cfg, b0, f);
  // manual linear mild recursion with the same slow noise
  const auto slow = cfg.make_slow_noise();
  SpectralVec v = cfg.x0;
  StepKernel kernel(cfg.spectrum, slow.dt, 1.0);
  for (int k = 0; k < cfg.n_macro_steps(); ++k) kernel.advance_nodrift(v.c, slow.row(k));
  CHECK(res1.x.back().c == v.c);
  // and the slow path is independent of the fast stream
  SlowFastConfig other = cfg;
  other.fast_stream = 9;
  const auto res2 = run_slow_fast(other, b0, f);
  CHECK(res1.x.back().c == res2.x.back().c);
}

TEST_CASE("degenerate scales epsilon=1 delta=T completes") {
  SlowFastConfig cfg = base_config();
  cfg.epsilon = 1.0;
  cfg.delta = cfg.T;
  const Drift b = make_kind("sincos", 1.0, 1.0);
  const Drift f = make_kind("sinsin", 1.0, 0.5);
  const auto res = run_slow_fast(cfg, b, f);
  CHECK(res.x.back().finite());
  CHECK(res.y.back().finite());
}

TEST_CASE("slow moments stay bounded") {
  SlowFastConfig cfg = base_config();
  const Drift b = make_kind("sincos", 1.0, 1.0);
  const Drift f = make_kind("sinsin", 1.0, 0.5);
  double acc = 0.0;
  int count = 0;
  for (std::uint32_t r = 0; r < 8; ++r) {
    SlowFastConfig rc = cfg;
    rc.replica = r;
    const auto res = run_slow_fast(rc, b, f);
    for (const auto& s : res.x.states) {
      acc += s.norm();
      ++count;
    }
  }
  const double bound = (1.0 + cfg.x0.norm()) * 4.0;
  CHECK(acc / count <= bound);
}

TEST_CASE("averaged run couplings") {
  SlowFastConfig cfg = base_config();
  const Drift f = make_kind("sinsin", 1.0, 0.5);
  const auto slow = cfg.make_slow_noise();

  SUBCASE("y-independent B: closed form couples exactly, estimator sits at the quantization floor") {
    const Drift b = make_kind("sin_x", 1.0, 0.0);
    BbarEstimator est(cfg.spectrum, cfg.alpha, b, f, cfg.y0, fast_estimator(), 42);
    const auto xa = run_averaged(cfg, est, slow);
    const auto xb = run_averaged(cfg, b, slow);
    // the coupled slow path coincides bitwise with the closed form (B does not see Y)
    const auto sf = run_slow_fast(cfg, b, f, slow, cfg.make_fast_noise());
    for (int i = 0; i < xb.n_saved(); ++i) CHECK(xb.states[i].c == sf.x.states[i].c);
    // the estimator evaluates at the quantized representative, so the two
    // routes differ only at the cache quantization scale
    for (int i = 0; i < xa.n_saved(); ++i) CHECK(dist(xa.states[i], xb.states[i]) <= 2e-3);
  }
  SUBCASE("zero drift matches the slow output bitwise") {
    const Drift b0 = make_kind("zero", 0, 0);
    const auto xb = run_averaged(cfg, b0, slow);
    const auto sf = run_slow_fast(cfg, b0, f, slow, cfg.make_fast_noise());
    for (int i = 0; i < xb.n_saved(); ++i) CHECK(xb.states[i].c == sf.x.states[i].c);
  }
  SUBCASE("disjoint estimator seeds land within the propagated spread") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    EstimatorConfig ec;
    ec.t_burn = 5.0;
    ec.t_avg = 10.0;
    ec.dt = 0.05;
    ec.n_replicas = 2;
    ec.stderr_tol = 10.0;
    BbarEstimator ea(cfg.spectrum, cfg.alpha, b, f, cfg.y0, ec, 1111);
    BbarEstimator eb(cfg.spectrum, cfg.alpha, b, f, cfg.y0, ec, 2222);
    const auto xa = run_averaged(cfg, ea, slow);
    const auto xb = run_averaged(cfg, eb, slow);
    const double diff = dist(xa.back(), xb.back());
    // independent per-step estimator noise accumulates through the damped
    // recursion: var ~ sigma^2 dt sum_n 1/lambda_n across both runs
    double sum_inv_lambda = 0.0;
    for (double l : cfg.spectrum.lambda) sum_inv_lambda += 1.0 / l;
    const double sigma = 0.5 * (ea.mean_stderr() + eb.mean_stderr());
    const double propagated = sigma * std::sqrt(cfg.dt_macro * sum_inv_lambda);
    INFO("diff ", diff, " propagated ", propagated);
    CHECK(diff <= 3.0 * propagated + 1e-9);
  }
  SUBCASE("closed form requires a y-independent drift") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    CHECK_THROWS_AS(run_averaged(cfg, b, slow), std::invalid_argument);
  }
}

TEST_CASE("khasminskii auxiliary process") {
  SlowFastConfig cfg = base_config();
  cfg.epsilon = 0.05;
  cfg.T = 1.0;
  cfg.dt_macro = 0.01;
  const Drift b = make_kind("sincos", 1.0, 1.0);

  SUBCASE("block beyond T freezes the slow argument at the start") {
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    cfg.delta = cfg.T;
    const auto slow = cfg.make_slow_noise();
    const auto fast = cfg.make_fast_noise();
    const auto sf = run_slow_fast(cfg, b, f, slow, fast);
    const auto yhat = khasminskii_auxiliary(cfg, f, sf.x, fast);
    // manual run with the slow argument pinned to x0
    StepKernel kernel(cfg.spectrum, fast.dt, 1.0 / cfg.epsilon);
    SpectralVec y = cfg.y0, g(8);
    Drift::Scratch scratch;
    const int n_micro = cfg.n_micro();
    for (int k = 0; k < cfg.n_macro_steps(); ++k)
      for (int j = 0; j < n_micro; ++j) {
        f.eval(cfg.x0, y, g, scratch);
        kernel.advance(y.c, g.c, fast.row(k * n_micro + j));
      }
    CHECK(yhat.back().c == y.c);
  }
  SUBCASE("x-independent F makes the auxiliary process identical") {
    const Drift f = make_kind("sin_y", 0.0, 0.5);
    cfg.delta = 0.1;
    const auto slow = cfg.make_slow_noise();
    const auto fast = cfg.make_fast_noise();
    const auto sf = run_slow_fast(cfg, b, f, slow, fast);
    const auto yhat = khasminskii_auxiliary(cfg, f, sf.x, fast);
    for (int i = 0; i < yhat.n_saved(); ++i) CHECK(yhat.states[i].c == sf.y.states[i].c);
  }
  SUBCASE("coupled integral decreases as delta halves") {
    const Drift f = make_kind("sinsin", 1.0, 0.5);
    cfg.delta = 0.0;
    const std::vector<double> deltas{0.2, 0.1, 0.05};
    const auto probe = khasminskii_delta_probe(cfg, b, f, deltas, 8, 1);
    CHECK(probe.medians.size() == 3);
    CHECK(probe.medians[1] < probe.medians[0]);
    CHECK(probe.medians[2] < probe.medians[1]);
  }
}

TEST_CASE("strong error reports") {
  SUBCASE("identical trajectories give an all-zero report") {
    std::vector<double> sups(8, 0.0);
    const std::vector<double> p{0.5, 1.0, 2.0};
    const auto rep = strong_error(sups, p, 0.4, 10.0);
    CHECK(rep.median == 0.0);
    CHECK(rep.q95 == 0.0);
    for (double m : rep.moments) CHECK(m == 0.0);
    CHECK(rep.ceiling_ok);
  }
  SUBCASE("constant offset is reproduced exactly") {
    Trajectory a, b;
    a.dt = b.dt = 0.1;
    SpectralVec c(8);
    c[2] = 0.75;
    for (int i = 0; i <= 5; ++i) {
      a.times.push_back(0.1 * i);
      b.times.push_back(0.1 * i);
      a.states.push_back(SpectralVec::zero(8));
      b.states.push_back(c);
    }
    CHECK(sup_distance(a, b) == doctest::Approx(0.75));
    std::vector<double> sups(4, 0.75);
    const std::vector<double> p{0.5, 1.0, 2.0};
    const auto rep = strong_error(sups, p, 0.4, 10.0);
    CHECK(rep.median == doctest::Approx(0.75));
    CHECK(rep.moments[0] == doctest::Approx(std::sqrt(0.75)));
    CHECK(rep.moments[1] == doctest::Approx(0.75));
    CHECK(rep.moments[2] == doctest::Approx(0.5625));
  }
  SUBCASE("mismatched grids are rejected") {
    Trajectory a, b;
    a.dt = b.dt = 0.1;
    a.times = {0.0};
    a.states = {SpectralVec::zero(8)};
    b.times = {0.0, 0.1};
    b.states = {SpectralVec::zero(8), SpectralVec::zero(8)};
    CHECK_THROWS_AS(sup_distance(a, b), std::invalid_argument);
  }
}

TEST_CASE("nominal rate metadata") {
  DriftSpec b;
  b.eta1 = 0.9;
  b.eta2 = 0.9;
  DriftSpec f;
  f.eta3 = 0.9;
  const double gamma = 1.75 / (1.75 * 0.35 + 1.0);
  CHECK(nominal_theta_tilde(b, f, 1.0, 0.8, gamma) == doctest::Approx(0.405));
}

TEST_CASE("convergence study") {
  StudyConfig sc;
  sc.base = base_config();
  sc.base.T = 0.5;
  sc.base.dt_macro = 0.005;
  sc.n_replicas = 8;
  sc.theta = 1.0;
  sc.theta_prime = 0.8;
  sc.gamma_index = 1.0853;
  const Drift f = make_kind("sinsin", 1.0, 0.5);

  SUBCASE("y-independent B collapses the study to exact zeros") {
    const Drift b = make_kind("sin_x", 1.0, 0.0);
    BbarEstimator est(sc.base.spectrum, sc.base.alpha, b, f, sc.base.y0, fast_estimator(), 42);
    sc.epsilons = {0.2};
    const auto table = convergence_study(sc, b, f, est);
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].ok);
    // averaged and slow dynamics coincide up to the cache quantization floor
    CHECK(table.rows[0].report.median <= 2e-3);
    CHECK_FALSE(table.have_slope);  // single point, no slope
  }
  SUBCASE("errors decrease with epsilon and respect the ceiling") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    BbarEstimator est(sc.base.spectrum, sc.base.alpha, b, f, sc.base.y0, fast_estimator(), 42);
    sc.epsilons = {0.5, 0.02};
    sc.n_replicas = 12;
    const auto table = convergence_study(sc, b, f, est);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].ok);
    CHECK(table.rows[1].ok);
    CHECK(table.rows[1].report.median < table.rows[0].report.median);
    CHECK(table.rows[0].report.ceiling_ok);
    CHECK(table.rows[1].report.ceiling_ok);
    CHECK(table.have_slope);
    CHECK(table.medians_monotone);
    CHECK(table.endpoints_strict);
  }
  SUBCASE("deterministic across jobs") {
    const Drift b = make_kind("sincos", 1.0, 1.0);
    sc.epsilons = {0.2, 0.05};
    sc.n_replicas = 6;
    BbarEstimator e1(sc.base.spectrum, sc.base.alpha, b, f, sc.base.y0, fast_estimator(), 42);
    sc.jobs = 1;
    const auto t1 = convergence_study(sc, b, f, e1);
    BbarEstimator e2(sc.base.spectrum, sc.base.alpha, b, f, sc.base.y0, fast_estimator(), 42);
    sc.jobs = 3;
    const auto t2 = convergence_study(sc, b, f, e2);
    for (std::size_t i = 0; i < t1.rows.size(); ++i) {
      CHECK(t1.rows[i].report.median == t2.rows[i].report.median);
      CHECK(t1.rows[i].report.sup_errors == t2.rows[i].report.sup_errors);
    }
  }
}

TEST_CASE("resource refusal for infeasible epsilon") {
  SlowFastConfig cfg = base_config();
  cfg.epsilon = 1e-6;
  cfg.memory_budget_bytes = 1 << 20;
  CHECK_THROWS_AS(cfg.make_fast_noise(), ResourceError);
}
