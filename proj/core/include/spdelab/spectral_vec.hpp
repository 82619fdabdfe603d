#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace spdelab {

// Element of the truncated Hilbert space as a coefficient sequence.
struct SpectralVec {
  std::vector<double> c;

  SpectralVec() = default;
  explicit SpectralVec(std::size_t n) : c(n, 0.0) {}
  explicit SpectralVec(std::vector<double> coeffs) : c(std::move(coeffs)) {}

  static SpectralVec zero(int n) { return SpectralVec(static_cast<std::size_t>(n)); }
  // unit vector e_{mode+1} (0-based mode index)
  static SpectralVec unit(int n, int mode) {
    SpectralVec v(static_cast<std::size_t>(n));
    v.c.at(static_cast<std::size_t>(mode)) = 1.0;
    return v;
  }

  int size() const { return static_cast<int>(c.size()); }
  double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  double* data() { return c.data(); }
  const double* data() const { return c.data(); }

  double norm() const {
    double s = 0.0;
    for (double v : c) s += v * v;
    return std::sqrt(s);
  }

  bool finite() const {
    for (double v : c)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void check_same_size(const SpectralVec& a, const SpectralVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("spectral vectors differ in dimension");
}

inline SpectralVec operator+(const SpectralVec& a, const SpectralVec& b) {
  check_same_size(a, b);
  SpectralVec out = a;
  for (int i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline SpectralVec operator-(const SpectralVec& a, const SpectralVec& b) {
  check_same_size(a, b);
  SpectralVec out = a;
  for (int i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline SpectralVec operator*(double s, const SpectralVec& a) {
  SpectralVec out = a;
  for (int i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

inline double dist(const SpectralVec& a, const SpectralVec& b) {
  check_same_size(a, b);
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double dot(const SpectralVec& a, const SpectralVec& b) {
  check_same_size(a, b);
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace spdelab
