#pragma once
// ideal_ei.hpp -- exponential-integrator schemes for the score-form SDE
//   dY_t = (alpha'/alpha) { Y_t + sigma^2 t  grad log p_t(Y_t) } dt + sigma dB_t
// with analytic scores, used to isolate discretization error from MCMC error.
//
// Each step freezes the score term sigma^2 t s(t, Y) at the left endpoint and
// integrates the remaining linear SDE exactly:
//   Y' = C Y + (C - 1) sigma^2 t_k s(t_k, Y) + noise_std Z,
// where C = alpha(t_{k+1})/alpha(t_k) and the noise variance is the Ito
// integral sigma^2 int_{t_k}^{t_{k+1}} (alpha(t_{k+1})/alpha(u))^2 du.
// The integral has closed forms for the geometric-to-infinity family and the
// (1,1), (2,1), (1,2) finite-horizon variants; other exponent pairs fall back
// to adaptive quadrature.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/gmm_analytic.hpp"
#include "slocal/parallel.hpp"
#include "slocal/rng.hpp"
#include "slocal/schedule.hpp"
#include "slocal/targets.hpp"

namespace slocal {

struct ei_step_coeffs {
  double multiplier = 1.0;  // scales both Y and sigma^2 t_k score
  double noise_std = 0.0;
};

enum class grid_mode { snr, uniform };

namespace detail {

inline void check_ei_times(const schedule_spec& s, double t_k, double t_kp1) {
  check_time(s, t_k);
  check_time(s, t_kp1);
  if (!(t_k < t_kp1))
    throw std::invalid_argument("ideal_ei: step needs t_k < t_{k+1}");
}

/// Recursive adaptive Simpson refinement on [a, b].
inline double simpson_recurse(const std::function<double(double)>& f,
                              double a, double b, double fa, double fm,
                              double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (depth <= 0)
    throw numeric_error("ideal_ei: noise quadrature failed to converge");
  if (std::abs(err) <= 15.0 * tol) return left + right + err / 15.0;
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

/// Adaptive Simpson over log-spaced panels of [a, b] (the integrand decays
/// like a power of u, so geometric panels equalize the work).
inline double adaptive_quadrature(const std::function<double(double)>& f,
                                  double a, double b, double rel_tol,
                                  double abs_floor) {
  const int panels = 8;
  const double ratio = std::pow(b / a, 1.0 / panels);
  // crude scale estimate for the absolute tolerance
  double scale = 0.0;
  double lo = a;
  for (int p = 0; p < panels; ++p) {
    const double hi = (p + 1 == panels) ? b : lo * ratio;
    scale += 0.5 * (std::abs(f(lo)) + std::abs(f(hi))) * (hi - lo);
    lo = hi;
  }
  const double tol = std::max(abs_floor, rel_tol * scale) / panels;
  double total = 0.0;
  lo = a;
  for (int p = 0; p < panels; ++p) {
    const double hi = (p + 1 == panels) ? b : lo * ratio;
    const double m = 0.5 * (lo + hi);
    const double fa = f(lo), fm = f(m), fb = f(hi);
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += simpson_recurse(f, lo, hi, fa, fm, fb, whole, tol, 48);
    lo = hi;
  }
  return total;
}

/// Noise variance by quadrature of sigma^2 (t'/u)^(a1+1) ((1-u)/(1-t'))^a2.
/// Exposed for tests that cross-check the closed-form specializations.
inline double ei_noise_var_quadrature(const schedule_spec& s, double t_k,
                                      double t_kp1, double sigma) {
  const double a1 = s.a1;
  const bool finite_horizon = s.family == schedule_family::geom;
  const double a2 = finite_horizon ? s.a2 : 0.0;
  auto f = [&](double u) {
    double v = std::pow(t_kp1 / u, a1 + 1.0);
    if (finite_horizon) v *= std::pow((1.0 - u) / (1.0 - t_kp1), a2);
    return v;
  };
  return sigma * sigma *
         adaptive_quadrature(f, t_k, t_kp1, 1e-10, 1e-14);
}

}  // namespace detail

/// Multiplier and noise scale for one exact-integrator step.
inline ei_step_coeffs ei_coeffs(const schedule_spec& s, double t_k,
                                double t_kp1, double sigma) {
  detail::check_ei_times(s, t_k, t_kp1);
  if (!(sigma > 0.0))
    throw std::invalid_argument("ideal_ei: sigma must be positive");

  const double a1 = s.a1;
  const double p = 0.5 * (a1 + 1.0);
  double log_mult = p * std::log(t_kp1 / t_k);
  if (s.family == schedule_family::geom)
    log_mult += 0.5 * s.a2 * (std::log1p(-t_k) - std::log1p(-t_kp1));

  const double s2 = sigma * sigma;
  double var = 0.0;
  if (s.family == schedule_family::geom_inf) {
    // sigma^2 (t'/(a1 t^a1)) (t'^a1 - t^a1)
    var = s2 * (t_kp1 / (a1 * std::pow(t_k, a1))) *
          (std::pow(t_kp1, a1) - std::pow(t_k, a1));
  } else if (a1 == 1.0 && s.a2 == 1.0) {
    var = s2 * ((t_kp1 * t_kp1 / (1.0 - t_kp1)) * std::log(t_k / t_kp1) +
                t_kp1 * (t_kp1 - t_k) / (t_k * (1.0 - t_kp1)));
  } else if (a1 == 2.0 && s.a2 == 1.0) {
    var = s2 * t_kp1 * t_kp1 * ((t_kp1 / t_k - 1.0) / (1.0 - t_kp1)) *
          ((t_k + t_kp1) / (2.0 * t_k * t_kp1) - 1.0);
  } else if (a1 == 1.0 && s.a2 == 2.0) {
    const double om = 1.0 - t_kp1;
    var = (s2 / (om * om)) *
          ((t_kp1 - t_k) * (t_kp1 * t_kp1 + t_kp1 / t_k) +
           2.0 * t_kp1 * t_kp1 * std::log(t_k / t_kp1));
  } else {
    var = detail::ei_noise_var_quadrature(s, t_k, t_kp1, sigma);
  }
  if (!(var >= 0.0) || !std::isfinite(var))
    throw numeric_error("ideal_ei: non-finite noise variance");
  return ei_step_coeffs{std::exp(log_mult), std::sqrt(var)};
}

/// One integrator step with precomputed coefficients. score_fn(t, y) must
/// return the observation-space score grad log p_t(y) at the left endpoint.
template <class ScoreFn>
vec ei_step(const ei_step_coeffs& c, double t_k, const vec& y,
            ScoreFn&& score_fn, double sigma, rng_stream& rng) {
  const vec score = score_fn(t_k, y);
  if (score.size() != y.size())
    throw std::invalid_argument("ideal_ei: score dimension mismatch");
  const double drift = (c.multiplier - 1.0) * sigma * sigma * t_k;
  vec out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j)
    out[j] = c.multiplier * y[j] + drift * score[j] + c.noise_std * rng.normal();
  return out;
}

/// One integrator step, coefficients derived from the schedule.
template <class ScoreFn>
vec ei_step(const schedule_spec& s, double t_k, double t_kp1, const vec& y,
            ScoreFn&& score_fn, double sigma, rng_stream& rng) {
  return ei_step(ei_coeffs(s, t_k, t_kp1, sigma), t_k, y,
                 std::forward<ScoreFn>(score_fn), sigma, rng);
}

/// Observation-noise constants read off a mixture: R is the largest mean
/// norm per sqrt-dimension (so that sigma^2 d tracks the second moment),
/// tau the largest component standard deviation.
inline a0_constants a0_from_mixture(const isotropic_mixture& mix) {
  double R = 0.0, var = 0.0;
  for (const auto& m : mix.means) R = std::max(R, norm(m));
  R /= std::sqrt(static_cast<double>(mix.dim));
  for (double v : mix.variances) var = std::max(var, v);
  return a0_constants{R, std::sqrt(var)};
}

/// Integrate the exact-score SDE for n_runs independent replicas over either
/// the SNR-adapted grid or a uniform grid with the same endpoints, and return
/// the terminal Y / alpha(T) for each. Results are identical for any worker
/// count.
inline std::vector<vec> run_ideal(const isotropic_mixture& mix,
                                  const schedule_spec& s, double t0,
                                  double eta, std::size_t K,
                                  std::size_t n_runs, grid_mode mode,
                                  const a0_constants& a0,
                                  std::uint64_t seed = 0,
                                  unsigned threads = 0) {
  if (n_runs == 0) throw std::invalid_argument("ideal_ei: need n_runs >= 1");
  const double sigma = sigma_from_a0(a0.R, a0.tau);
  const time_grid grid =
      mode == grid_mode::snr
          ? snr_grid(s, t0, eta, K)
          : uniform_grid(s, t0, t_of_log_snr(s, eta), K);
  const double alpha_T = alpha_and_dot(s, grid.t.back()).alpha;
  auto score = [&](double t, const vec& y) {
    return obs_score(mix, s, sigma, t, y);
  };
  std::vector<ei_step_coeffs> coeffs(grid.steps());
  for (std::size_t k = 0; k < grid.steps(); ++k)
    coeffs[k] = ei_coeffs(s, grid.t[k], grid.t[k + 1], sigma);

  std::vector<vec> samples(n_runs);
  parallel_for(n_runs, resolve_threads(threads), [&](std::size_t i) {
    rng_stream rng(seed, static_cast<std::uint64_t>(i),
                   rng_phase::observation);
    vec y = rng.normal_vec(mix.dim);
    for (auto& v : y) v *= sigma * std::sqrt(t0);
    for (std::size_t k = 0; k < grid.steps(); ++k) {
      y = ei_step(coeffs[k], grid.t[k], y, score, sigma, rng);
      if (!all_finite(y))
        throw numeric_error("ideal_ei: non-finite state at step " +
                            std::to_string(k));
    }
    for (auto& v : y) v /= alpha_T;
    samples[i] = std::move(y);
  });
  return samples;
}

/// Convenience overload deriving the noise constants from the mixture.
inline std::vector<vec> run_ideal(const isotropic_mixture& mix,
                                  const schedule_spec& s, double t0,
                                  double eta, std::size_t K,
                                  std::size_t n_runs, grid_mode mode,
                                  std::uint64_t seed = 0,
                                  unsigned threads = 0) {
  return run_ideal(mix, s, t0, eta, K, n_runs, mode, a0_from_mixture(mix),
                   seed, threads);
}

}  // namespace slocal
