#include "spdelab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spdelab {

double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("sample_mean: empty");
  double s = 0.0;
  for (double v : xs) s += v;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_variance: need at least 2 samples");
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double v : xs) s += (v - m) * (v - m);
  return s / static_cast<double>(xs.size() - 1);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

double quantile(std::vector<double> xs, double p) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, p);
}

double iqr_stderr(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("iqr_stderr: need at least 2 samples");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const double iqr = quantile_sorted(v, 0.75) - quantile_sorted(v, 0.25);
  return iqr / 1.349 / std::sqrt(static_cast<double>(xs.size()));
}

double hill_index(std::span<const double> abs_sorted_desc, int k) {
  if (k < 1 || k + 1 > static_cast<int>(abs_sorted_desc.size()))
    throw std::invalid_argument("hill_index: k out of range");
  const double ref = std::log(abs_sorted_desc[static_cast<std::size_t>(k)]);
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += std::log(abs_sorted_desc[static_cast<std::size_t>(i)]) - ref;
  return static_cast<double>(k) / s;
}

double hill_index_extrapolated(std::span<const double> samples, double frac_lo, double frac_hi) {
  const std::size_t n = samples.size();
  const int k_lo = static_cast<int>(frac_lo * static_cast<double>(n));
  const int k_hi = static_cast<int>(frac_hi * static_cast<double>(n));
  if (k_lo < 10 || k_hi <= k_lo + 2)
    throw std::invalid_argument("hill_index_extrapolated: sample too small for the k window");
  std::vector<double> d(samples.begin(), samples.end());
  for (double& v : d) v = std::abs(v);
  std::sort(d.begin(), d.end(), std::greater<>());

  // H(k) = mean of log-spacings over the top k, computed incrementally
  std::vector<double> h(static_cast<std::size_t>(k_hi) + 1, 0.0);
  double acc = 0.0;
  for (int k = 1; k <= k_hi; ++k) {
    acc += std::log(d[static_cast<std::size_t>(k - 1)]);
    h[static_cast<std::size_t>(k)] = acc / k - std::log(d[static_cast<std::size_t>(k)]);
  }

  // weighted LS of H(k) = g + c1 (k/n) + c2 (k/n)^2, weight k since
  // var(H) ~ 1/k; the quadratic term absorbs the residual curvature of the
  // bias over the wide window
  double s[5] = {0, 0, 0, 0, 0};
  double b[3] = {0, 0, 0};
  for (int k = k_lo; k <= k_hi; ++k) {
    const double w = static_cast<double>(k);
    const double x = static_cast<double>(k) / static_cast<double>(n);
    const double y = h[static_cast<std::size_t>(k)];
    double xp = 1.0;
    for (int j = 0; j < 5; ++j) {
      s[j] += w * xp;
      if (j < 3) b[j] += w * xp * y;
      xp *= x;
    }
  }
  double m[3][4] = {{s[0], s[1], s[2], b[0]}, {s[1], s[2], s[3], b[1]}, {s[2], s[3], s[4], b[2]}};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::abs(m[row][col]) > std::abs(m[pivot][col])) pivot = row;
    std::swap(m[col], m[pivot]);
    if (m[col][col] == 0.0) throw std::invalid_argument("hill_index_extrapolated: degenerate fit");
    for (int row = 0; row < 3; ++row) {
      if (row == col) continue;
      const double f = m[row][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[row][j] -= f * m[col][j];
    }
  }
  const double g = m[0][3] / m[0][0];  // intercept = 1/alpha
  return 1.0 / g;
}

double tail_slope(std::span<const double> samples, double frac_deep, double frac_shallow) {
  const std::size_t n = samples.size();
  const int k_lo = static_cast<int>(frac_deep * static_cast<double>(n));
  const int k_hi = static_cast<int>(frac_shallow * static_cast<double>(n));
  if (k_lo < 10 || k_hi <= k_lo) throw std::invalid_argument("tail_slope: window too small");
  std::vector<double> d(samples.begin(), samples.end());
  for (double& v : d) v = std::abs(v);
  std::sort(d.begin(), d.end(), std::greater<>());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int k = k_lo; k <= k_hi; ++k) {
    const double x = std::log(d[static_cast<std::size_t>(k)]);
    const double y = std::log(static_cast<double>(k) / static_cast<double>(n));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  const double denom = cnt * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("tail_slope: degenerate fit");
  return -(cnt * sxy - sx * sy) / denom;
}

double sas_cdf(double x, double alpha) {
  if (!(alpha > 1.0 && alpha <= 2.0))
    throw std::invalid_argument("sas_cdf: alpha must lie in (1, 2]");
  if (x == 0.0) return 0.5;
  if (x < 0.0) return 1.0 - sas_cdf(-x, alpha);
  // Gil-Pelaez: F(x) = 1/2 + (1/pi) int_0^inf sin(u x) e^{-u^alpha} / u du,
  // Simpson on [0, u_max] with the integrand extended by x at u = 0.
  const double u_max = std::pow(45.0, 1.0 / alpha);  // e^{-45} ~ 3e-20
  const int n = 20000;                               // even
  const double hstep = u_max / n;
  auto f = [&](double u) {
    if (u == 0.0) return x;
    return std::sin(u * x) * std::exp(-std::pow(u, alpha)) / u;
  };
  double s = f(0.0) + f(u_max);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(hstep * i);
  const double integral = s * hstep / 3.0;
  return 0.5 + integral / std::numbers::pi;
}

double sas_quantile(double p, double alpha) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("sas_quantile: p must lie in (0,1)");
  if (p == 0.5) return 0.0;
  if (p < 0.5) return -sas_quantile(1.0 - p, alpha);
  double lo = 0.0, hi = 1.0;
  while (sas_cdf(hi, alpha) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    (sas_cdf(mid, alpha) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double sas_abs_quantile(double p, double alpha) { return sas_quantile(0.5 * (1.0 + p), alpha); }

QuantileComparison two_sample_quantile_test(std::vector<double> a, std::vector<double> b,
                                            int n_quantiles) {
  if (a.size() < 100 || b.size() < 100)
    throw std::invalid_argument("two_sample_quantile_test: samples too small");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  QuantileComparison cmp;
  const double dp = 0.01;
  for (int i = 1; i <= n_quantiles; ++i) {
    const double p = static_cast<double>(i) / (n_quantiles + 1);
    const double qa = quantile_sorted(a, p);
    const double qb = quantile_sorted(b, p);
    // dq/dp from each sample's quantile function
    auto slope = [&](const std::vector<double>& s) {
      const double pl = std::max(p - dp, 1e-6), ph = std::min(p + dp, 1.0 - 1e-6);
      return (quantile_sorted(s, ph) - quantile_sorted(s, pl)) / (ph - pl);
    };
    const double va = p * (1.0 - p) / static_cast<double>(a.size()) * slope(a) * slope(a);
    const double vb = p * (1.0 - p) / static_cast<double>(b.size()) * slope(b) * slope(b);
    const double tol = 3.0 * std::sqrt(va + vb);
    cmp.probs.push_back(p);
    cmp.qa.push_back(qa);
    cmp.qb.push_back(qb);
    cmp.tol.push_back(tol);
    const double ratio = tol > 0.0 ? std::abs(qa - qb) / tol : 0.0;
    cmp.worst_ratio = std::max(cmp.worst_ratio, ratio);
    if (std::abs(qa - qb) > tol) ++cmp.n_failures;
  }
  return cmp;
}

}  // namespace spdelab
