#pragma once
// concavity.hpp -- duality-of-log-concavity calculator.
//
// For a target with dispersion constants (d, R, tau) the observation marginal
// p_t and the tilted posterior q_t admit uniform Hessian bounds
//   zeta_p(t) = alpha^2 d R^2 / (alpha^2 tau^2 + sigma^2 t)^2
//               - 1 / (alpha^2 tau^2 + sigma^2 t),
//   zeta_q(t) = d R^2 / tau^4 - 1 / tau^2 - g(t)^2 / sigma^2.
// p_t is log-concave while t <= t_p (zeta_p <= 0) and q_t becomes log-concave
// once t >= t_q (zeta_q <= 0); the window (t_q, t_p) where both hold is
// nonempty exactly when d R^2 < 2 tau^2, which guides the choice of t0.
//
// For the symmetric two-mode mixture w N(-a 1_d, gamma^2 I) +
// (1-w) N(+a 1_d, gamma^2 I) the Hessians are available exactly, and the
// bounds tighten by replacing R with R~ = R / (2 max(w, 1-w)).

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/gmm_analytic.hpp"
#include "slocal/schedule.hpp"

namespace slocal {

/// Dispersion constants entering the concavity bounds. The optional weight w
/// activates the two-mode refinement, which substitutes
/// R~ = R / (2 max(w, 1-w)) for R in every formula.
struct a0_params {
  std::size_t d = 1;
  double R = 1.0;
  double tau = 1.0;
  double sigma = 1.0;
  std::optional<double> w;
};

inline void validate(const a0_params& p) {
  if (p.d < 1) throw std::invalid_argument("concavity: need d >= 1");
  if (!(p.R > 0.0)) throw std::invalid_argument("concavity: need R > 0");
  if (!(p.tau >= 0.0)) throw std::invalid_argument("concavity: need tau >= 0");
  if (!(p.sigma > 0.0))
    throw std::invalid_argument("concavity: need sigma > 0");
  if (p.w && !(*p.w > 0.0 && *p.w < 1.0))
    throw std::invalid_argument(
        "concavity: refinement weight must lie in (0, 1)");
}

/// R, or the refined R~ when a mixture weight is supplied.
inline double effective_r(const a0_params& p) {
  validate(p);
  if (!p.w) return p.R;
  return p.R / (2.0 * std::max(*p.w, 1.0 - *p.w));
}

namespace detail {

inline void require_tau(const a0_params& p) {
  if (!(p.tau > 0.0))
    throw std::invalid_argument(
        "concavity: zeta formulas are undefined at tau = 0");
}

/// 1 / (1 + cosh x) without overflow for large |x|.
inline double inv_one_plus_cosh(double x) {
  const double e = std::exp(-std::abs(x));
  const double one_plus = 1.0 + e;
  return 2.0 * e / (one_plus * one_plus);
}

}  // namespace detail

/// Upper bound on the top Hessian eigenvalue of log p_t (observation side).
inline double zeta_p(const a0_params& p, const schedule_spec& s, double t) {
  detail::require_tau(p);
  const double r = effective_r(p);
  const double alpha = alpha_and_dot(s, t).alpha;
  const double v =
      alpha * alpha * p.tau * p.tau + p.sigma * p.sigma * t;
  return alpha * alpha * static_cast<double>(p.d) * r * r / (v * v) - 1.0 / v;
}

/// Upper bound on the top Hessian eigenvalue of log q_t (posterior side).
inline double zeta_q(const a0_params& p, const schedule_spec& s, double t) {
  detail::require_tau(p);
  const double r = effective_r(p);
  const double g = g_of_t(s, t);
  const double tau2 = p.tau * p.tau;
  return static_cast<double>(p.d) * r * r / (tau2 * tau2) - 1.0 / tau2 -
         g * g / (p.sigma * p.sigma);
}

/// Concavity thresholds: p_t stays log-concave up to t_p, q_t becomes
/// log-concave from t_q on.
struct concavity_window {
  double t_q = 0.0;
  double t_p = 0.0;
};

/// g^{-1} through the log-SNR inversion (log SNR = 2 log g).
inline double g_inverse(const schedule_spec& s, double u) {
  if (!(u > 0.0))
    throw std::invalid_argument("concavity: g is positive; need u > 0");
  return t_of_log_snr(s, 2.0 * std::log(u));
}

inline concavity_window t_p_t_q(const a0_params& p, const schedule_spec& s) {
  validate(p);
  const double r = effective_r(p);
  const double dr2 = static_cast<double>(p.d) * r * r;
  const double tau2 = p.tau * p.tau;
  if (dr2 <= tau2) return concavity_window{0.0, s.t_gen()};
  if (!(p.tau > 0.0))
    // limit tau -> 0: t_q escapes to the generation horizon, the window
    // is empty, and only the p-side threshold remains informative
    return concavity_window{s.t_gen(),
                            g_inverse(s, p.sigma / std::sqrt(dr2))};
  const double excess = std::sqrt(dr2 - tau2);
  return concavity_window{g_inverse(s, p.sigma * excess / tau2),
                          g_inverse(s, p.sigma / excess)};
}

/// Whether the two log-concavity regimes overlap (t_q < t_p): exactly
/// d R^2 < 2 tau^2, with R~ substituted when the refinement weight is set.
inline bool duality_holds(const a0_params& p) {
  const double r = effective_r(p);
  return static_cast<double>(p.d) * r * r < 2.0 * p.tau * p.tau;
}

/// The symmetric two-mode mixture w N(-a 1_d, gamma^2 I) +
/// (1-w) N(+a 1_d, gamma^2 I) used by the exact-Hessian formulas.
inline isotropic_mixture two_mode_mixture(std::size_t d, double a,
                                          double gamma, double w) {
  return make_mixture({w, 1.0 - w}, {vec(d, -a), vec(d, a)},
                      {gamma * gamma, gamma * gamma});
}

namespace detail {

/// c 1_d 1_d^T + lam I as a flat row-major d x d matrix.
inline std::vector<double> rank_one_plus_diag(std::size_t d, double c,
                                              double lam) {
  std::vector<double> h(d * d, c);
  for (std::size_t i = 0; i < d; ++i) h[i * d + i] += lam;
  return h;
}

}  // namespace detail

/// Exact Hessian of log p_t(y) for the two-mode mixture (flat row-major).
inline std::vector<double> two_mode_hessian_obs(double a, double gamma,
                                                double w,
                                                const schedule_spec& s,
                                                double sigma, double t,
                                                const vec& y) {
  const double alpha = alpha_and_dot(s, t).alpha;
  const double v = alpha * alpha * gamma * gamma + sigma * sigma * t;
  double ysum = 0.0;
  for (double u : y) ysum += u;
  const double aux =
      2.0 * alpha * a * ysum / v + std::log(1.0 / w - 1.0);
  const double c = 2.0 * alpha * alpha * a * a / (v * v) *
                   detail::inv_one_plus_cosh(aux);
  return detail::rank_one_plus_diag(y.size(), c, -1.0 / v);
}

/// Exact Hessian of log q_t(x | y) for the two-mode mixture (flat
/// row-major). The anchor y only shifts the gradient, not the curvature.
inline std::vector<double> two_mode_hessian_posterior(double a, double gamma,
                                                      double w,
                                                      const schedule_spec& s,
                                                      double sigma, double t,
                                                      const vec& x) {
  const double g = g_of_t(s, t);
  const double g2 = gamma * gamma;
  double xsum = 0.0;
  for (double u : x) xsum += u;
  const double aux = 2.0 * a * xsum / g2 + std::log(1.0 / w - 1.0);
  const double c =
      2.0 * a * a / (g2 * g2) * detail::inv_one_plus_cosh(aux);
  return detail::rank_one_plus_diag(
      x.size(), c, -1.0 / g2 - g * g / (sigma * sigma));
}

/// Top eigenvalue of c 1 1^T + lam I: lam + d c for c >= 0 (the formulas
/// above always produce c >= 0).
inline double top_eigenvalue(const std::vector<double>& h, std::size_t d) {
  if (h.size() != d * d)
    throw std::invalid_argument("concavity: matrix/dimension mismatch");
  const double lam = h[0] - (d > 1 ? h[1] : 0.0);
  const double c = d > 1 ? h[1] : h[0] - lam;
  return lam + static_cast<double>(d) * c;
}

}  // namespace slocal
