#pragma once

#include <span>
#include <vector>

namespace spdelab {

double sample_mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);

// linear-interpolation quantile of a copy of xs
double quantile(std::vector<double> xs, double p);
// same on already-sorted data
double quantile_sorted(std::span<const double> sorted, double p);

// Heavy-tail robust standard error: IQR / 1.349 / sqrt(n).
double iqr_stderr(std::span<const double> xs);

// Plain Hill estimate of the tail index from the k largest |x|.
double hill_index(std::span<const double> abs_sorted_desc, int k);

// Reduced-bias Hill: for laws with survival C x^{-a} (1 + O(x^{-a})) the Hill
// statistic satisfies E[H(k)] ~ 1/a + c k/n + O((k/n)^2), so a weighted
// quadratic fit over k/n in [frac_lo, frac_hi] extrapolated to k = 0 removes
// the dominant bias while keeping most of the tail's information.
// Operates on |samples|.
double hill_index_extrapolated(std::span<const double> samples, double frac_lo = 3e-4,
                               double frac_hi = 1.2e-2);

// LS slope of log empirical survival against log |x| between the upper-tail
// quantile levels [frac_deep, frac_shallow].
double tail_slope(std::span<const double> samples, double frac_deep = 2e-4,
                  double frac_shallow = 2e-3);

// CDF of the standard SaS law (cf exp(-|u|^alpha)) by characteristic-function
// inversion; serves as the sampler-independent quantile oracle.
double sas_cdf(double x, double alpha);
double sas_quantile(double p, double alpha);
// quantile of |X|
double sas_abs_quantile(double p, double alpha);

struct QuantileComparison {
  std::vector<double> probs;
  std::vector<double> qa, qb;
  std::vector<double> tol;  // 3 sigma of the difference estimator
  int n_failures = 0;
  double worst_ratio = 0.0;  // max |qa-qb| / tol
  bool pass() const { return n_failures == 0; }
};

// Two-sample quantile comparison at n_quantiles evenly spaced levels; the
// tolerance is 3x the asymptotic std of the difference of sample quantiles
// (density estimated from the quantile function slope).
QuantileComparison two_sample_quantile_test(std::vector<double> a, std::vector<double> b,
                                            int n_quantiles = 19);

}  // namespace spdelab
