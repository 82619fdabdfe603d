#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "spdelab/errors.hpp"
#include "spdelab/stable_noise.hpp"
#include "spdelab/stats.hpp"
#include "test_util.hpp"

using namespace spdelab;

TEST_CASE("stable params validation") {
  CHECK_THROWS_AS((StableParams{1.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((StableParams{2.1, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((StableParams{1.5, 0.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((StableParams{2.0, 1.0}.validate()));  // Gaussian test limit
}

TEST_CASE("empty sample request") {
  RngStream rng(1);
  CHECK(sample_sas((StableParams{1.75, 1.0}), 0, rng).empty());
}

TEST_CASE("gaussian limit has variance 2") {
  RngStream rng(42);
  const auto xs = sample_sas(StableParams{2.0, 1.0}, 1'000'000, rng);
  const double var = sample_variance(xs);
  CHECK(var == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("tail index recovered at alpha 1.75") {
  RngStream rng(7);
  const auto xs = sample_sas(StableParams{1.75, 1.0}, 1'000'000, rng);
  const double hill = hill_index_extrapolated(xs);
  CHECK(std::abs(hill - 1.75) <= 0.1);
}

TEST_CASE("scaling property: scale sigma equals sigma times scale one") {
  RngStream r1(100), r2(200);
  auto a = sample_sas(StableParams{1.6, 3.0}, 200'000, r1);
  auto b = sample_sas(StableParams{1.6, 1.0}, 200'000, r2);
  for (double& v : b) v *= 3.0;
  const auto cmp = two_sample_quantile_test(std::move(a), std::move(b), 19);
  CHECK(cmp.pass());
}

TEST_CASE("ou increment scale closed forms") {
  // Gaussian OU variance oracle: sqrt((1 - e^{-2})/2)
  CHECK(ou_increment_scale(1.0, 1.0, 2.0, 1.0) == doctest::Approx(0.657519853983).epsilon(1e-9));

  // dt -> 0 first-order limit at lambda dt = 1e-4
  const double a = 1.75;
  const double small = ou_increment_scale(1.0, 2.0, a, 1e-4);
  CHECK(small == doctest::Approx(2.0 * std::pow(1e-4, 1.0 / a)).epsilon(0.01));

  // lambda dt -> infinity: stationary scale amplitude (alpha lambda)^{-1/alpha}
  const double big = ou_increment_scale(3.0, 1.5, a, 1e6);
  CHECK(big == doctest::Approx(1.5 * std::pow(a * 3.0, -1.0 / a)).epsilon(1e-12));

  // strictly increasing in dt
  double prev = 0.0;
  for (double dt = 0.01; dt < 10.0; dt *= 2.0) {
    const double s = ou_increment_scale(1.0, 1.0, a, dt);
    CHECK(s > prev);
    prev = s;
  }

  CHECK_THROWS_AS(ou_increment_scale(0.0, 1.0, a, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ou_increment_scale(1.0, 1.0, a, 0.0), std::invalid_argument);
}

TEST_CASE("noise path basics") {
  const auto spec = testutil::heat_spectrum();
  const SeedLineage lineage{42, 3, StreamDomain::kSlowNoise, 0};

  SUBCASE("zero steps gives an empty path") {
    const auto p = generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.1, 0, 1.0, lineage);
    CHECK(p.steps == 0);
    CHECK(p.increments.empty());
  }
  SUBCASE("same lineage reproduces bit-exactly") {
    const auto p1 = generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.1, 50, 1.0, lineage);
    const auto p2 = generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.1, 50, 1.0, lineage);
    CHECK(p1.increments == p2.increments);
    CHECK(p1.finite());
  }
  SUBCASE("slow band requires epsilon one") {
    CHECK_THROWS_AS(generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.1, 10, 0.5, lineage),
                    std::invalid_argument);
  }
  SUBCASE("memory budget is enforced") {
    CHECK_THROWS_AS(
        generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.1, 1'000'000, 1.0, lineage, 1024),
        ResourceError);
  }
}

TEST_CASE("single mode stable OU is stationary") {
  ModeSpectrum spec;
  spec.lambda = {1.0};
  spec.beta = {1.0};
  spec.gamma_coef = {1.0};
  const double alpha = 1.75, dt = 0.01;
  const int steps = 100'000;
  const auto path = generate_noise_path(spec, alpha, NoiseBand::kSlow, dt, steps, 1.0,
                                        SeedLineage{9, 0, StreamDomain::kSlowNoise, 0});
  const double decay = std::exp(-dt);
  double v = 0.0;
  std::vector<double> abs_second;
  double mean_first = 0.0, mean_second = 0.0;
  for (int k = 0; k < steps; ++k) {
    v = decay * v + path.increments[static_cast<std::size_t>(k)];
    if (k < steps / 2) {
      mean_first += std::abs(v);
    } else {
      abs_second.push_back(std::abs(v));
      mean_second += std::abs(v);
    }
  }
  mean_first /= (steps / 2);
  mean_second /= abs_second.size();
  // no growth across halves
  CHECK(mean_second / mean_first > 0.8);
  CHECK(mean_second / mean_first < 1.25);
  // long-run median matches the stationary scale (alpha lambda)^{-1/alpha}
  const double stat_scale = std::pow(alpha, -1.0 / alpha);
  const double expected_median = stat_scale * sas_abs_quantile(0.5, alpha);
  CHECK(quantile(abs_second, 0.5) == doctest::Approx(expected_median).epsilon(0.05));
}

TEST_CASE("fast band absorbs the epsilon prefactor exactly") {
  ModeSpectrum spec;
  spec.lambda = {2.0};
  spec.beta = {1.0};
  spec.gamma_coef = {0.7};
  const double alpha = 1.75, dt = 0.05, eps = 0.01;
  const int steps = 200'000;
  const auto path = generate_noise_path(spec, alpha, NoiseBand::kFast, dt, steps, eps,
                                        SeedLineage{11, 0, StreamDomain::kFastNoise, 0});
  // per-step scale of eps^{-1/alpha} int e^{(dt-s)A/eps} dZ
  const double expected =
      0.7 * std::pow(-std::expm1(-alpha * 2.0 * dt / eps) / (alpha * 2.0), 1.0 / alpha);
  std::vector<double> abs_inc(path.increments);
  for (double& w : abs_inc) w = std::abs(w);
  const double med = quantile(abs_inc, 0.5);
  CHECK(med / sas_abs_quantile(0.5, alpha) == doctest::Approx(expected).epsilon(0.02));
  // deep in the fast regime the scale is the epsilon-free stationary one
  CHECK(expected == doctest::Approx(0.7 * std::pow(alpha * 2.0, -1.0 / alpha)).epsilon(1e-6));
}

TEST_CASE("split-step distributional exactness") {
  const auto spec = testutil::heat_spectrum(4);
  const double dt = 0.05;
  const int ns = 50'000;
  const auto direct = generate_noise_path(spec, 1.75, NoiseBand::kSlow, dt, ns, 1.0,
                                          SeedLineage{121, 0, StreamDomain::kSlowNoise, 0});
  const auto fine = generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.5 * dt, 2 * ns, 1.0,
                                        SeedLineage{122, 0, StreamDomain::kSlowNoise, 0});
  const auto composed = aggregate_pairs(fine, spec, 1.0);
  CHECK(composed.dt == doctest::Approx(dt));
  for (int m = 0; m < spec.n_modes(); ++m) {
    std::vector<double> a(static_cast<std::size_t>(ns)), b(static_cast<std::size_t>(ns));
    for (int k = 0; k < ns; ++k) {
      a[static_cast<std::size_t>(k)] = direct.increments[static_cast<std::size_t>(k) * 4 + m];
      b[static_cast<std::size_t>(k)] = composed.increments[static_cast<std::size_t>(k) * 4 + m];
    }
    const auto cmp = two_sample_quantile_test(std::move(a), std::move(b), 19);
    INFO("mode ", m, " worst ratio ", cmp.worst_ratio);
    CHECK(cmp.pass());
  }
}

TEST_CASE("binary dump round trip") {
  const auto spec = testutil::heat_spectrum(3);
  const auto path = generate_noise_path(spec, 1.75, NoiseBand::kSlow, 0.25, 17, 1.0,
                                        SeedLineage{5, 1, StreamDomain::kSlowNoise, 0});
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  dump_noise_path(path, ss);
  // 32-byte header + payload
  CHECK(ss.str().size() == 32 + 17 * 3 * sizeof(double));
  const auto loaded = load_noise_path(ss);
  CHECK(loaded.steps == path.steps);
  CHECK(loaded.n_modes == path.n_modes);
  CHECK(loaded.dt == path.dt);
  CHECK(loaded.increments == path.increments);
}

TEST_CASE("assumption report flags") {
  const auto spec = testutil::heat_spectrum();
  SUBCASE("heat preset passes") {
    const auto rep = check_assumptions(spec, 1.75, 0.05, 0.35);
    CHECK(rep.all_pass());
    CHECK(rep.gamma_index == doctest::Approx(1.75 / (1.75 * 0.35 + 1.0)));
  }
  SUBCASE("flat amplitudes diverge") {
    ModeSpectrum flat = spec;
    for (double& b : flat.beta) b = 1.0;
    const auto rep = check_assumptions(flat, 1.75, 0.05);
    CHECK_FALSE(rep.beta_sum_converges);
  }
  SUBCASE("kappa1 beyond the admissible envelope fails the Lambda3 flag") {
    // kappa1 >= (alpha - alpha r - 1)/alpha makes r + kappa1 + 1/alpha >= 1
    const double bad = (1.75 - 1.75 * 0.35 - 1.0) / 1.75 + 0.01;
    const auto rep = check_assumptions(spec, 1.75, bad, 0.35);
    CHECK_FALSE(rep.lambda3_integral_finite);
    const auto good = check_assumptions(spec, 1.75, bad - 0.02, 0.35);
    CHECK(good.lambda3_integral_finite);
  }
  SUBCASE("sums and Lambda functions are monotone in the truncation level") {
    const auto r4 = check_assumptions(testutil::heat_spectrum(4), 1.75, 0.05, 0.35);
    const auto r8 = check_assumptions(testutil::heat_spectrum(8), 1.75, 0.05, 0.35);
    CHECK(r8.sum_beta_alpha >= r4.sum_beta_alpha);
    CHECK(r8.sum_gamma_alpha >= r4.sum_gamma_alpha);
    CHECK(r8.sum_inv_lambda >= r4.sum_inv_lambda);
    for (std::size_t i = 0; i < r4.t_grid.size(); ++i) {
      CHECK(r8.lambda1[i] >= r4.lambda1[i] - 1e-12);
      CHECK(r8.lambda3[i] >= r4.lambda3[i] - 1e-12);
    }
  }
}
