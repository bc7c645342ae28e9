#pragma once
// common.hpp -- shared error types, dense-vector helpers, log-space utilities.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace slocal {

using vec = std::vector<double>;
using sample_set = std::vector<vec>;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when a computation produces non-finite values or an iterative
/// routine fails where success is part of the contract (distinct from
/// std::invalid_argument, which flags bad configuration up front).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline double dot(const vec& a, const vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sq_norm(const vec& a) { return dot(a, a); }
inline double norm(const vec& a) { return std::sqrt(sq_norm(a)); }

inline double sq_dist(const vec& a, const vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// y += c * x
inline void axpy(double c, const vec& x, vec& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline vec scaled(const vec& x, double c) {
  vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = c * x[i];
  return y;
}

inline bool all_finite(const vec& a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

inline double mean(const vec& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return a.empty() ? 0.0 : s / static_cast<double>(a.size());
}

/// log(sum_i exp(a_i)) computed stably; returns -inf on an empty input.
inline double log_sum_exp(const vec& a) {
  double m = -kInf;
  for (double v : a) m = std::max(m, v);
  if (!std::isfinite(m)) return m;  // all -inf (or empty)
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

/// log(exp(a) + exp(b)) computed stably.
inline double log_add_exp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -kInf) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace slocal
