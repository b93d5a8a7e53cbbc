#pragma once

// Small shared utilities: dense vector/matrix helpers on std::vector<double>,
// compensated summation, and an FNV-1a hash used to stamp CSV outputs.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hb {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major, rectangular

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

inline void axpy(double a, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline Vec scaled(const Vec& x, double a) {
  Vec r = x;
  for (double& v : r) v *= a;
  return r;
}

inline Vec vsum(const Vec& x, const Vec& y) {
  Vec r = x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += y[i];
  return r;
}

inline Vec vdiff(const Vec& x, const Vec& y) {
  Vec r = x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y[i];
  return r;
}

inline double dot(const Vec& x, const Vec& y) {
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

inline double norm_inf(const Vec& x) {
  double m = 0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

inline bool all_finite(const Vec& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

// Kahan-compensated accumulator for reproducible long sums.
struct CompensatedVec {
  Vec sum, comp;
  explicit CompensatedVec(std::size_t d) : sum(d, 0.0), comp(d, 0.0) {}
  void add(double a, const Vec& x) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      double y = a * x[i] - comp[i];
      double t = sum[i] + y;
      comp[i] = (t - sum[i]) - y;
      sum[i] = t;
    }
  }
};

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace hb
