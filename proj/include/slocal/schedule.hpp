#pragma once
// schedule.hpp -- denoising schedules, drift coefficients, and SNR grids.
//
// A schedule fixes the time scaling of the observation process
//   Y_t = alpha(t) X + sigma W_t,   alpha(t) = sqrt(t) * g(t),
// through the denoising function g. Two families are supported:
//
//   geom_inf(a1):  g(t) = t^(a1/2)                  on t in (0, inf)
//   geom(a1, a2):  g(t) = t^(a1/2) * (1-t)^(-a2/2)  on t in (0, 1)
//
// "standard" is geom_inf(1), i.e. alpha(t) = t. Constraints: a1 >= 1,
// a2 > 0. With the noise scale sigma tied to the target's second moment,
// the signal-to-noise ratio at time t is SNR(t) = g(t)^2, so grids with
// equal log-SNR increments concentrate steps where information arrives.

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <string>
#include <vector>

#include "slocal/common.hpp"

namespace slocal {

enum class schedule_family { geom_inf, geom };

struct schedule_spec {
  schedule_family family = schedule_family::geom_inf;
  double a1 = 1.0;
  double a2 = 0.0;  // geom only

  static schedule_spec standard() { return make_geom_inf(1.0); }

  static schedule_spec make_geom_inf(double a1) {
    if (!(a1 >= 1.0))
      throw std::invalid_argument("schedule: require a1 >= 1, got a1=" +
                                  std::to_string(a1));
    return schedule_spec{schedule_family::geom_inf, a1, 0.0};
  }

  static schedule_spec make_geom(double a1, double a2) {
    if (!(a1 >= 1.0))
      throw std::invalid_argument("schedule: require a1 >= 1, got a1=" +
                                  std::to_string(a1));
    if (!(a2 > 0.0))
      throw std::invalid_argument("schedule: require a2 > 0, got a2=" +
                                  std::to_string(a2));
    return schedule_spec{schedule_family::geom, a1, a2};
  }

  /// Parse the config spelling: "standard" | "geom-inf:<a1>" | "geom:<a1>,<a2>".
  static schedule_spec parse(const std::string& text);

  std::string str() const;

  /// Right end of the valid time domain: inf for geom_inf, 1 for geom.
  double t_gen() const {
    return family == schedule_family::geom_inf ? kInf : 1.0;
  }

  bool operator==(const schedule_spec& o) const {
    return family == o.family && a1 == o.a1 && a2 == o.a2;
  }
};

namespace detail {

inline void check_time(const schedule_spec& s, double t) {
  if (s.family == schedule_family::geom_inf) {
    if (!(t > 0.0) || !std::isfinite(t))
      throw std::invalid_argument("schedule: t must be in (0, inf), got t=" +
                                  std::to_string(t));
  } else {
    if (!(t > 0.0) || !(t < 1.0))
      throw std::invalid_argument("schedule: t must be in (0, 1), got t=" +
                                  std::to_string(t));
  }
}

inline double parse_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("schedule: cannot parse " + what + " from '" +
                                text + "'");
  }
  if (used != text.size())
    throw std::invalid_argument("schedule: trailing characters in " + what +
                                " '" + text + "'");
  return v;
}

inline std::string num_str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// Denoising function g(t).
inline double g_of_t(const schedule_spec& s, double t) {
  detail::check_time(s, t);
  if (s.family == schedule_family::geom_inf) return std::pow(t, 0.5 * s.a1);
  return std::pow(t, 0.5 * s.a1) * std::pow(1.0 - t, -0.5 * s.a2);
}

struct alpha_pair {
  double alpha;
  double alpha_dot;
};

/// alpha(t) = sqrt(t) g(t) and its time derivative (closed forms).
inline alpha_pair alpha_and_dot(const schedule_spec& s, double t) {
  detail::check_time(s, t);
  if (s.family == schedule_family::geom_inf) {
    const double p = 0.5 * (s.a1 + 1.0);
    return {std::pow(t, p), p * std::pow(t, p - 1.0)};
  }
  // alpha(t) = t^((a1+1)/2) (1-t)^(-a2/2); product rule gives
  // alpha'(t) = t^((a1-1)/2) (1-t)^(-a2/2-1) [ (a1+1)/2 (1-t) + a2/2 t ].
  const double p = 0.5 * (s.a1 + 1.0);
  const double q = 0.5 * s.a2;
  const double alpha = std::pow(t, p) * std::pow(1.0 - t, -q);
  const double dot = std::pow(t, p - 1.0) * std::pow(1.0 - t, -q - 1.0) *
                     (p * (1.0 - t) + q * t);
  return {alpha, dot};
}

/// log SNR(t) = 2 log g(t).
inline double log_snr(const schedule_spec& s, double t) {
  detail::check_time(s, t);
  if (s.family == schedule_family::geom_inf) return s.a1 * std::log(t);
  return s.a1 * std::log(t) - s.a2 * std::log1p(-t);
}

/// Inverse of log_snr. Closed form for geom_inf and for geom with a1 == a2;
/// otherwise bisection on [1e-15, 1 - 1e-15] (log_snr is strictly increasing).
inline double t_of_log_snr(const schedule_spec& s, double eta) {
  if (!std::isfinite(eta))
    throw std::invalid_argument("schedule: log-SNR level must be finite");
  if (s.family == schedule_family::geom_inf) return std::exp(eta / s.a1);
  if (s.a1 == s.a2) {
    // a1 log(t/(1-t)) = eta  =>  logistic form, stable for either sign.
    return 1.0 / (1.0 + std::exp(-eta / s.a1));
  }
  double lo = 1e-15, hi = 1.0 - 1e-15;
  if (eta <= log_snr(s, lo) || eta >= log_snr(s, hi))
    throw std::invalid_argument("schedule: log-SNR level " +
                                detail::num_str(eta) +
                                " outside invertible bracket");
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_snr(s, mid) < eta)
      lo = mid;
    else
      hi = mid;
  }
  const double t = 0.5 * (lo + hi);
  if (std::fabs(log_snr(s, t) - eta) > 1e-12 * std::max(1.0, std::fabs(eta)))
    throw numeric_error("schedule: log-SNR inversion did not converge");
  return t;
}

/// Discretization grid: K+1 times with per-step widths and drift weights.
struct time_grid {
  std::vector<double> t;      // size K+1
  std::vector<double> delta;  // delta_k = t_{k+1} - t_k
  std::vector<double> w;      // w_k = alpha(t_{k+1}) - alpha(t_k)

  std::size_t steps() const { return delta.size(); }
};

namespace detail {

inline time_grid grid_from_times(const schedule_spec& s,
                                 std::vector<double> times) {
  time_grid grid;
  grid.t = std::move(times);
  const std::size_t K = grid.t.size() - 1;
  grid.delta.resize(K);
  grid.w.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    grid.delta[k] = grid.t[k + 1] - grid.t[k];
    grid.w[k] = alpha_and_dot(s, grid.t[k + 1]).alpha -
                alpha_and_dot(s, grid.t[k]).alpha;
    if (!(grid.delta[k] > 0.0))
      throw numeric_error("schedule: grid times are not strictly increasing");
  }
  return grid;
}

}  // namespace detail

/// Grid with equal log-SNR increments from t0 up to the time T where
/// log SNR(T) = eta. Requires log SNR(t0) < eta.
inline time_grid snr_grid(const schedule_spec& s, double t0, double eta,
                          std::size_t K) {
  if (K < 1) throw std::invalid_argument("schedule: grid needs K >= 1 steps");
  detail::check_time(s, t0);
  const double s0 = log_snr(s, t0);
  if (!(s0 < eta))
    throw std::invalid_argument(
        "schedule: t0 already at or past the terminal log-SNR level (log SNR(t0)=" +
        detail::num_str(s0) + ", eta=" + detail::num_str(eta) + ")");
  std::vector<double> times(K + 1);
  times[0] = t0;
  for (std::size_t k = 1; k < K; ++k) {
    const double sk =
        s0 + (eta - s0) * static_cast<double>(k) / static_cast<double>(K);
    times[k] = t_of_log_snr(s, sk);
  }
  times[K] = t_of_log_snr(s, eta);
  return detail::grid_from_times(s, times);
}

/// Uniformly spaced grid on [t0, T] (comparison baseline for the SNR grid).
inline time_grid uniform_grid(const schedule_spec& s, double t0, double T,
                              std::size_t K) {
  if (K < 1) throw std::invalid_argument("schedule: grid needs K >= 1 steps");
  detail::check_time(s, t0);
  detail::check_time(s, T);
  if (!(t0 < T))
    throw std::invalid_argument("schedule: uniform grid needs t0 < T");
  std::vector<double> times(K + 1);
  for (std::size_t k = 0; k <= K; ++k)
    times[k] = t0 + (T - t0) * static_cast<double>(k) / static_cast<double>(K);
  times[K] = T;
  return detail::grid_from_times(s, times);
}

/// Observation noise scale sigma = sqrt(R^2 + tau^2) from the target's
/// dispersion constants (so that sigma^2 d matches the second moment bound).
inline double sigma_from_a0(double R, double tau) {
  if (!(R >= 0.0) || !(tau >= 0.0) || !(R + tau > 0.0))
    throw std::invalid_argument(
        "schedule: dispersion constants must be nonnegative and not both zero");
  return std::hypot(R, tau);
}

inline schedule_spec schedule_spec::parse(const std::string& text) {
  if (text == "standard") return standard();
  const std::string geom_inf_prefix = "geom-inf:";
  const std::string geom_prefix = "geom:";
  if (text.rfind(geom_inf_prefix, 0) == 0)
    return make_geom_inf(detail::parse_double(
        text.substr(geom_inf_prefix.size()), "a1"));
  if (text.rfind(geom_prefix, 0) == 0) {
    const std::string rest = text.substr(geom_prefix.size());
    const auto comma = rest.find(',');
    if (comma == std::string::npos)
      throw std::invalid_argument(
          "schedule: expected 'geom:<a1>,<a2>', got '" + text + "'");
    return make_geom(detail::parse_double(rest.substr(0, comma), "a1"),
                     detail::parse_double(rest.substr(comma + 1), "a2"));
  }
  throw std::invalid_argument("schedule: unknown spelling '" + text +
                              "' (expected 'standard', 'geom-inf:<a1>', or "
                              "'geom:<a1>,<a2>')");
}

inline std::string schedule_spec::str() const {
  if (family == schedule_family::geom_inf)
    return a1 == 1.0 ? "standard" : "geom-inf:" + detail::num_str(a1);
  return "geom:" + detail::num_str(a1) + "," + detail::num_str(a2);
}

}  // namespace slocal
