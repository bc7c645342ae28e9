#pragma once
// baselines.hpp -- annealed importance sampling (AIS) and sequential Monte
// Carlo (SMC) reference samplers. Both follow a linear inverse-temperature
// path from a broad centered Gaussian rho_0 = N(0, R^2 d I) to the target,
// moving particles with adaptive MALA at each level. AIS returns raw
// accumulated log-weights (normalize with normalized_weights); SMC adds
// systematic resampling and returns an unweighted particle set.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/mcmc.hpp"
#include "slocal/parallel.hpp"
#include "slocal/rng.hpp"
#include "slocal/targets.hpp"

namespace slocal {

// ---------------------------------------------------------------------------
// Annealing path.

struct anneal_path {
  double rho0_var = 1.0;     ///< per-coordinate variance R^2 d of rho_0
  std::vector<double> beta;  ///< K+1 knots, beta[0] = 0, beta[K] = 1

  std::size_t levels() const { return beta.empty() ? 0 : beta.size() - 1; }

  static anneal_path linear(const target_model& target, std::size_t k) {
    if (k < 1)
      throw std::invalid_argument("baselines: need at least one anneal level");
    if (target.dim < 1)
      throw std::invalid_argument("baselines: target dimension must be >= 1");
    anneal_path p;
    p.rho0_var =
        target.a0.R * target.a0.R * static_cast<double>(target.dim);
    if (!(p.rho0_var > 0.0))
      throw std::invalid_argument(
          "baselines: target R must be positive to define rho_0");
    p.beta.resize(k + 1);
    for (std::size_t i = 0; i <= k; ++i)
      p.beta[i] = static_cast<double>(i) / static_cast<double>(k);
    return p;
  }
};

inline double log_rho0(const vec& x, double var) {
  return -sq_norm(x) / (2.0 * var) -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI * var);
}

inline vec grad_log_rho0(const vec& x, double var) {
  return scaled(x, -1.0 / var);
}

/// Annealed log density at knot k: (1-beta_k) log rho_0 + beta_k log pi.
/// At the endpoints the inactive term is multiplied by exactly zero, so the
/// path starts at rho_0 and ends at pi exactly.
inline double level_log_density(const target_model& t, const anneal_path& p,
                                std::size_t k, const vec& x) {
  const double b = p.beta.at(k);
  return (1.0 - b) * log_rho0(x, p.rho0_var) + b * t.log_density(x);
}

inline vec level_grad(const target_model& t, const anneal_path& p,
                      std::size_t k, const vec& x) {
  const double b = p.beta.at(k);
  vec g = t.grad_log_density(x);
  const double c = (1.0 - b) / p.rho0_var;
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = b * g[j] - c * x[j];
  return g;
}

// ---------------------------------------------------------------------------
// Weight utilities.

/// Softmax of log-weights: probabilities summing to one.
inline vec normalized_weights(const vec& log_weights) {
  if (log_weights.empty())
    throw std::invalid_argument("baselines: empty weight vector");
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse))
    throw numeric_error("baselines: log-weights are not normalizable");
  vec w(log_weights.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = std::exp(log_weights[i] - lse);
  return w;
}

/// Effective sample size 1 / sum(w_i^2) of the normalized weights; equals N
/// for uniform weights and 1 when a single particle carries all mass.
inline double effective_sample_size(const vec& log_weights) {
  const vec w = normalized_weights(log_weights);
  double s = 0.0;
  for (double v : w) s += v * v;
  return 1.0 / s;
}

namespace detail {

/// Systematic resampling: one uniform offset, N evenly spaced strata against
/// the cumulative weights. Uniform weights map every slot to itself.
inline std::vector<std::size_t> systematic_resample(const vec& w,
                                                    rng_stream& rng) {
  const std::size_t n = w.size();
  std::vector<std::size_t> idx(n);
  const double u0 = rng.uniform() / static_cast<double>(n);
  std::size_t j = 0;
  double cum = w[0];
  for (std::size_t i = 0; i < n; ++i) {
    const double u = u0 + static_cast<double>(i) / static_cast<double>(n);
    while (cum < u && j + 1 < n) cum += w[++j];
    idx[i] = j;
  }
  return idx;
}

inline vec draw_rho0(std::size_t dim, double var, rng_stream& rng) {
  const double sd = std::sqrt(var);
  vec x(dim);
  for (auto& v : x) v = sd * rng.normal();
  return x;
}

inline step_controller prior_scale_controller(double var) {
  step_controller ctrl;
  ctrl.step_size = var;
  return ctrl;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// AIS.

struct ais_result {
  sample_set particles;
  vec log_weights;  ///< raw accumulated increments (unnormalized)
  double ess = 0.0;
  bool degenerate = false;  ///< ESS < 2: weights carry almost no information
};

/// Annealed importance sampling: N particles from rho_0; at each of the K
/// levels the log-weight increment (beta_{k+1} - beta_k)(log pi - log rho_0)
/// is taken at the current positions, then mcmc_steps adaptive MALA steps
/// target the next annealed density. Particles evolve independently on
/// per-particle random streams, so results do not depend on thread count.
inline ais_result ais_run(const target_model& target, std::size_t k_levels,
                          std::size_t n_particles, std::size_t mcmc_steps,
                          std::uint64_t seed, unsigned threads = 0) {
  if (n_particles < 1)
    throw std::invalid_argument("baselines: need at least one particle");
  const anneal_path path = anneal_path::linear(target, k_levels);
  const double var = path.rho0_var;

  ais_result out;
  out.particles.assign(n_particles, vec());
  out.log_weights.assign(n_particles, 0.0);

  parallel_for(n_particles, resolve_threads(threads), [&](std::size_t i) {
    rng_stream init_rng(seed, i, rng_phase::observation);
    rng_stream move_rng(seed, i, rng_phase::chain);
    vec x = detail::draw_rho0(target.dim, var, init_rng);
    double logw = 0.0;
    chain_state chain;
    bool chain_ready = false;
    for (std::size_t k = 0; k < path.levels(); ++k) {
      const double delta = path.beta[k + 1] - path.beta[k];
      logw += delta * (target.log_density(x) - log_rho0(x, var));
      if (mcmc_steps == 0) continue;
      const std::size_t level = k + 1;
      const auto lp = [&, level](const vec& z) {
        return level_log_density(target, path, level, z);
      };
      const auto gr = [&, level](const vec& z) {
        return level_grad(target, path, level, z);
      };
      if (!chain_ready) {
        chain = make_chain(x, lp, gr, detail::prior_scale_controller(var));
        chain_ready = true;
      } else {
        refresh_chain(chain, lp, gr);
      }
      for (std::size_t s = 0; s < mcmc_steps; ++s) {
        const bool accepted = mala_step(chain, lp, gr, move_rng);
        adapt_step(chain.ctrl, accepted);
      }
      x = chain.x;
    }
    out.particles[i] = std::move(x);
    out.log_weights[i] = logw;
  });

  out.ess = effective_sample_size(out.log_weights);
  out.degenerate = out.ess < 2.0;
  return out;
}

// ---------------------------------------------------------------------------
// SMC.

struct smc_result {
  sample_set particles;  ///< unweighted
  std::size_t resample_count = 0;
  double final_ess = 0.0;  ///< ESS right before the terminal unweighting
  bool degenerate = false;
};

/// Sequential Monte Carlo: the AIS recursion plus systematic resampling
/// whenever the ESS of the running weights drops below N/2 (weights reset to
/// uniform after each resample). The returned particles are unweighted; if
/// the final weights are not already uniform, one last systematic resample
/// converts the weighted ensemble into an unweighted one. Per-slot random
/// streams keep moves deterministic under any thread count; resampling draws
/// from a dedicated coordinator stream.
inline smc_result smc_run(const target_model& target, std::size_t k_levels,
                          std::size_t n_particles, std::size_t mcmc_steps,
                          std::uint64_t seed, unsigned threads = 0) {
  if (n_particles < 1)
    throw std::invalid_argument("baselines: need at least one particle");
  const anneal_path path = anneal_path::linear(target, k_levels);
  const double var = path.rho0_var;
  const unsigned workers = resolve_threads(threads);

  sample_set xs(n_particles);
  vec logw(n_particles, 0.0);
  std::vector<step_controller> ctrls(n_particles,
                                     detail::prior_scale_controller(var));
  std::vector<rng_stream> move_rngs;
  move_rngs.reserve(n_particles);
  for (std::size_t i = 0; i < n_particles; ++i)
    move_rngs.emplace_back(seed, i, rng_phase::chain);
  rng_stream coordinator(seed, 0, rng_phase::algorithm);

  parallel_for(n_particles, workers, [&](std::size_t i) {
    rng_stream init_rng(seed, i, rng_phase::observation);
    xs[i] = detail::draw_rho0(target.dim, var, init_rng);
  });

  smc_result out;
  const auto resample = [&](const vec& w) {
    const auto idx = detail::systematic_resample(w, coordinator);
    sample_set nxs(n_particles);
    std::vector<step_controller> nctrls(n_particles);
    for (std::size_t i = 0; i < n_particles; ++i) {
      nxs[i] = xs[idx[i]];
      nctrls[i] = ctrls[idx[i]];
    }
    xs = std::move(nxs);
    ctrls = std::move(nctrls);
    std::fill(logw.begin(), logw.end(), 0.0);
  };

  for (std::size_t k = 0; k < path.levels(); ++k) {
    const double delta = path.beta[k + 1] - path.beta[k];
    parallel_for(n_particles, workers, [&](std::size_t i) {
      logw[i] += delta * (target.log_density(xs[i]) - log_rho0(xs[i], var));
    });
    const vec w = normalized_weights(logw);
    double sum_sq = 0.0;
    for (double v : w) sum_sq += v * v;
    if (1.0 / sum_sq < 0.5 * static_cast<double>(n_particles)) {
      resample(w);
      ++out.resample_count;
    }
    if (mcmc_steps == 0) continue;
    const std::size_t level = k + 1;
    parallel_for(n_particles, workers, [&](std::size_t i) {
      const auto lp = [&, level](const vec& z) {
        return level_log_density(target, path, level, z);
      };
      const auto gr = [&, level](const vec& z) {
        return level_grad(target, path, level, z);
      };
      chain_state chain = make_chain(xs[i], lp, gr, ctrls[i]);
      for (std::size_t s = 0; s < mcmc_steps; ++s) {
        const bool accepted = mala_step(chain, lp, gr, move_rngs[i]);
        adapt_step(chain.ctrl, accepted);
      }
      xs[i] = std::move(chain.x);
      ctrls[i] = chain.ctrl;
    });
  }

  out.final_ess = effective_sample_size(logw);
  out.degenerate = out.final_ess < 2.0;
  double lo = logw[0], hi = logw[0];
  for (double v : logw) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo > 1e-12) resample(normalized_weights(logw));
  out.particles = std::move(xs);
  return out;
}

}  // namespace slocal
