#pragma once
// gmm_analytic.hpp -- closed-form observation-time quantities for isotropic
// Gaussian mixtures: noisy marginals, scores, conditional posteriors, and the
// exact denoiser E[X | Y_t = y]. These double as benchmark targets and as
// oracles against which the samplers are tested.
//
// Conventions: the observation process is Y_t = alpha(t) X + sigma W_t with
// alpha(t) = sqrt(t) g(t). For a mixture with isotropic component covariances
// gamma_i^2 I the time-t marginal stays a mixture with means alpha(t) m_i and
// variances t (g^2 gamma_i^2 + sigma^2); conditioning on Y_t = y keeps the
// mixture form with reweighted components, shrunk means, and variances
// gamma_i^2 sigma^2 / (sigma^2 + g^2 gamma_i^2).

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/rng.hpp"
#include "slocal/schedule.hpp"

namespace slocal {

struct isotropic_mixture {
  std::size_t dim = 0;
  std::vector<double> weights;    // positive, sum to 1
  std::vector<vec> means;         // one per component
  std::vector<double> variances;  // isotropic variance per component

  std::size_t components() const { return weights.size(); }
};

inline isotropic_mixture make_mixture(std::vector<double> weights,
                                      std::vector<vec> means,
                                      std::vector<double> variances) {
  if (weights.empty() || weights.size() != means.size() ||
      weights.size() != variances.size())
    throw std::invalid_argument(
        "mixture: need matching, non-empty weights/means/variances");
  const std::size_t d = means.front().size();
  if (d == 0) throw std::invalid_argument("mixture: zero-dimensional mean");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0))
      throw std::invalid_argument("mixture: weights must be positive");
    if (!(variances[i] > 0.0))
      throw std::invalid_argument("mixture: variances must be positive");
    if (means[i].size() != d)
      throw std::invalid_argument("mixture: inconsistent mean dimensions");
    sum += weights[i];
  }
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("mixture: weights must sum to 1, got " +
                                std::to_string(sum));
  for (auto& w : weights) w /= sum;
  isotropic_mixture mix;
  mix.dim = d;
  mix.weights = std::move(weights);
  mix.means = std::move(means);
  mix.variances = std::move(variances);
  return mix;
}

namespace detail {

inline void check_point(const isotropic_mixture& mix, const vec& x,
                        const char* what) {
  if (x.size() != mix.dim)
    throw std::invalid_argument(std::string("mixture: ") + what +
                                " has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(mix.dim));
}

/// Per-component log w_i + log N(x; m_i, v_i I).
inline vec component_log_terms(const isotropic_mixture& mix, const vec& x) {
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double d = static_cast<double>(mix.dim);
  vec lt(mix.components());
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const double v = mix.variances[i];
    lt[i] = std::log(mix.weights[i]) - 0.5 * d * (kLog2Pi + std::log(v)) -
            0.5 * sq_dist(x, mix.means[i]) / v;
  }
  return lt;
}

}  // namespace detail

/// Normalized log density of the mixture at x.
inline double log_density(const isotropic_mixture& mix, const vec& x) {
  detail::check_point(mix, x, "point");
  return log_sum_exp(detail::component_log_terms(mix, x));
}

/// Gradient of log_density at x (responsibility-weighted component pulls).
inline vec score(const isotropic_mixture& mix, const vec& x) {
  detail::check_point(mix, x, "point");
  const vec lt = detail::component_log_terms(mix, x);
  const double lz = log_sum_exp(lt);
  vec s(mix.dim, 0.0);
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const double r = std::exp(lt[i] - lz);
    const double c = r / mix.variances[i];
    for (std::size_t j = 0; j < mix.dim; ++j)
      s[j] += c * (mix.means[i][j] - x[j]);
  }
  return s;
}

/// Exact draw: categorical component choice, then an isotropic normal.
inline vec sample_mixture(const isotropic_mixture& mix, rng_stream& rng) {
  double u = rng.uniform();
  std::size_t pick = mix.components() - 1;
  for (std::size_t i = 0; i < mix.components(); ++i) {
    if (u < mix.weights[i]) {
      pick = i;
      break;
    }
    u -= mix.weights[i];
  }
  vec x = rng.normal_vec(mix.dim);
  const double sd = std::sqrt(mix.variances[pick]);
  for (std::size_t j = 0; j < mix.dim; ++j)
    x[j] = mix.means[pick][j] + sd * x[j];
  return x;
}

/// Law of Y_t = alpha(t) X + sigma W_t when X follows the mixture.
inline isotropic_mixture obs_marginal(const isotropic_mixture& mix,
                                      const schedule_spec& s, double sigma,
                                      double t) {
  if (!(sigma > 0.0))
    throw std::invalid_argument("mixture: sigma must be positive");
  const double alpha = alpha_and_dot(s, t).alpha;
  const double g2 = std::pow(g_of_t(s, t), 2);
  isotropic_mixture out;
  out.dim = mix.dim;
  out.weights = mix.weights;
  out.means.reserve(mix.components());
  out.variances.reserve(mix.components());
  for (std::size_t i = 0; i < mix.components(); ++i) {
    out.means.push_back(scaled(mix.means[i], alpha));
    out.variances.push_back(t * (g2 * mix.variances[i] + sigma * sigma));
  }
  return out;
}

/// Score of the time-t marginal at y.
inline vec obs_score(const isotropic_mixture& mix, const schedule_spec& s,
                     double sigma, double t, const vec& y) {
  return score(obs_marginal(mix, s, sigma, t), y);
}

/// Conditional law of X given Y_t = y (again an isotropic mixture).
inline isotropic_mixture posterior(const isotropic_mixture& mix,
                                   const schedule_spec& s, double sigma,
                                   double t, const vec& y) {
  detail::check_point(mix, y, "observation");
  if (!(sigma > 0.0))
    throw std::invalid_argument("mixture: sigma must be positive");
  const double alpha = alpha_and_dot(s, t).alpha;
  const double g = g_of_t(s, t);
  const double g2 = g * g;
  const double s2 = sigma * sigma;
  constexpr double kLog2Pi = 1.8378770664093454836;
  const double d = static_cast<double>(mix.dim);

  isotropic_mixture post;
  post.dim = mix.dim;
  post.means.reserve(mix.components());
  post.variances.reserve(mix.components());
  vec lw(mix.components());
  const vec y_over_alpha = scaled(y, 1.0 / alpha);
  for (std::size_t i = 0; i < mix.components(); ++i) {
    const double gi2 = mix.variances[i];
    // responsibility of component i for the rescaled observation
    const double vi = gi2 + s2 / g2;
    lw[i] = std::log(mix.weights[i]) - 0.5 * d * (kLog2Pi + std::log(vi)) -
            0.5 * sq_dist(mix.means[i], y_over_alpha) / vi;
    // shrunk component: precision 1/gamma_i^2 + g^2/sigma^2
    const double vpost = gi2 * s2 / (s2 + g2 * gi2);
    vec mpost(mix.dim);
    const double pull = g / (std::sqrt(t) * s2);
    for (std::size_t j = 0; j < mix.dim; ++j)
      mpost[j] = vpost * (mix.means[i][j] / gi2 + y[j] * pull);
    post.means.push_back(std::move(mpost));
    post.variances.push_back(vpost);
  }
  const double lz = log_sum_exp(lw);
  post.weights.resize(mix.components());
  for (std::size_t i = 0; i < mix.components(); ++i)
    post.weights[i] = std::exp(lw[i] - lz);
  return post;
}

/// Exact denoiser u_t(y) = E[X | Y_t = y]: posterior-weighted mean.
inline vec denoiser_oracle(const isotropic_mixture& mix,
                           const schedule_spec& s, double sigma, double t,
                           const vec& y) {
  const isotropic_mixture post = posterior(mix, s, sigma, t, y);
  vec u(mix.dim, 0.0);
  for (std::size_t i = 0; i < post.components(); ++i)
    axpy(post.weights[i], post.means[i], u);
  return u;
}

/// Draw Y_t = alpha(t) X + sigma sqrt(t) Z for X from the mixture.
inline vec sample_obs(const isotropic_mixture& mix, const schedule_spec& s,
                      double sigma, double t, rng_stream& rng) {
  const double alpha = alpha_and_dot(s, t).alpha;
  vec y = sample_mixture(mix, rng);
  const double sd = sigma * std::sqrt(t);
  for (std::size_t j = 0; j < mix.dim; ++j)
    y[j] = alpha * y[j] + sd * rng.normal();
  return y;
}

// ---------------------------------------------------------------------------
// Exact localization laws for a single isotropic Gaussian N(m, gamma^2 I).

/// W2 distance between the target and the rescaled observation Y_t/alpha(t),
/// whose law is N(m, (gamma^2 + sigma^2/g^2) I).
inline double gaussian_marginal_w2(double gamma, double g, double sigma,
                                   std::size_t d) {
  const double ratio = std::sqrt(1.0 + (sigma * sigma) / (gamma * gamma * g * g));
  return gamma * std::fabs(1.0 - ratio) * std::sqrt(static_cast<double>(d));
}

/// W2 distance between the target and the law of the exact denoiser
/// u_t(Y_t) ~ N(m, gamma^2 (1 + sigma^2/(gamma^2 g^2))^{-1} I).
inline double gaussian_denoiser_w2(double gamma, double g, double sigma,
                                   std::size_t d) {
  const double ratio =
      1.0 / std::sqrt(1.0 + (sigma * sigma) / (gamma * gamma * g * g));
  return gamma * std::fabs(1.0 - ratio) * std::sqrt(static_cast<double>(d));
}

/// Universal localization rate sigma sqrt(d) / g(t).
inline double localization_bound(double sigma, std::size_t d, double g) {
  return sigma * std::sqrt(static_cast<double>(d)) / g;
}

}  // namespace slocal
