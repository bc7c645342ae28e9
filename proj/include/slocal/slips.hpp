#pragma once
// slips.hpp -- the stochastic-localization sampler.
//
// The algorithm integrates the observation SDE
//   dY_t = alpha'(t) u_t(Y_t) dt + sigma dB_t
// forward over an SNR-adapted grid, where the denoiser u_t(y) = E[X | Y_t=y]
// is estimated at each step by a persistent MALA chain targeting the tilted
// posterior
//   mu_{t,y}(x)  proportional to  pi(x) N(x; y/alpha(t), sigma^2/g(t)^2 I).
// The returned sample is the final denoiser estimate at the terminal time.
//
// Initialization warms up both the observation and the chain: Y^0 is drawn
// from the stationary-at-zero law N(0, sigma^2 t0 I), then a fixed number of
// unadjusted Langevin updates with step sigma^2 t0 / 2 move Y^n along the
// estimated score (alpha(t0) U - Y)/(sigma^2 t0), with the inner chain
// persisting between updates.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/mcmc.hpp"
#include "slocal/parallel.hpp"
#include "slocal/rng.hpp"
#include "slocal/schedule.hpp"
#include "slocal/targets.hpp"

namespace slocal {

struct slips_config {
  schedule_spec schedule = schedule_spec::standard();
  double t0 = 0.25;
  double eta = 5.0;           // terminal log-SNR level
  std::size_t K = 1024;       // SDE steps
  std::size_t mcmc_steps = 32;  // MALA steps per denoiser estimate (L)
  std::size_t n_init = 20;    // outer initialization updates
  double burn_frac = 0.5;     // discarded fraction of each MALA run
  double adjust_factor = 1.01;
  double target_accept = 0.75;
  bool freeze_adaptation = false;
  std::uint64_t seed = 0;
  unsigned threads = 0;       // 0: hardware count, capped by SLOCAL_THREADS
};

inline void validate(const slips_config& cfg, const target_model& target) {
  if (cfg.K < 1) throw std::invalid_argument("slips: need K >= 1 SDE steps");
  if (cfg.mcmc_steps < 1)
    throw std::invalid_argument("slips: need at least one MALA step");
  if (!(cfg.burn_frac >= 0.0) || !(cfg.burn_frac < 1.0))
    throw std::invalid_argument("slips: burn fraction must lie in [0, 1)");
  if (!target.log_density || !target.grad_log_density)
    throw std::invalid_argument("slips: target lacks density callbacks");
  if (target.dim < 1) throw std::invalid_argument("slips: target dimension 0");
  // delegates domain checks for t0/eta and a0 to schedule helpers
  (void)snr_grid(cfg.schedule, cfg.t0, cfg.eta, cfg.K);
  (void)sigma_from_a0(target.a0.R, target.a0.tau);
  validate(step_controller{1.0, cfg.adjust_factor, cfg.target_accept, false});
}

namespace detail {

/// Tilted posterior mu_{t,y}: target times an isotropic Gaussian tether.
struct posterior_density {
  const target_model* target = nullptr;
  vec tether;          // y / alpha(t)
  double prec = 1.0;   // g(t)^2 / sigma^2

  double logpdf(const vec& x) const {
    return target->log_density(x) - 0.5 * prec * sq_dist(x, tether);
  }
  vec grad(const vec& x) const {
    vec g = target->grad_log_density(x);
    for (std::size_t j = 0; j < g.size(); ++j)
      g[j] -= prec * (x[j] - tether[j]);
    return g;
  }
  void retarget(const vec& y, double alpha, double g_over_sigma_sq) {
    tether = scaled(y, 1.0 / alpha);
    prec = g_over_sigma_sq;
  }
};

}  // namespace detail

/// Mutable per-run state: the observation, the persistent posterior chain,
/// and the tilted density the chain currently targets.
struct slips_state {
  vec y;
  chain_state chain;
  detail::posterior_density posterior;
  double sigma = 1.0;
  // Step-size transport: the posterior's natural scale is the harmonic sum
  // of the within-mode precision 1/tau^2 and the tether precision g^2/s^2.
  // Carrying the adapted step across retargets in units of that scale keeps
  // the chain near its acceptance equilibrium even on coarse grids, where
  // the tether tightens much faster than geometric adaptation can follow.
  double mode_prec = 0.0;  // 1/tau^2, or 0 when tau = 0
  double last_prec = 0.0;  // tether precision at the previous target
  std::uint64_t init_accepts = 0;
  std::uint64_t init_proposals = 0;
};

/// Draw Y ~ N(0, sigma^2 t0 I) and run the Langevin-within-Langevin warmup.
/// The inner chain starts at Y/alpha(t0) on the first outer update and
/// persists afterward (position, gradient cache, and adapted step size).
inline slips_state init_observation(const target_model& target,
                                    const slips_config& cfg,
                                    rng_stream& obs_rng,
                                    rng_stream& chain_rng) {
  const double sigma = sigma_from_a0(target.a0.R, target.a0.tau);
  const double t0 = cfg.t0;
  const double alpha0 = alpha_and_dot(cfg.schedule, t0).alpha;
  const double g0 = g_of_t(cfg.schedule, t0);
  const double s2 = sigma * sigma;

  slips_state st;
  st.sigma = sigma;
  st.y = obs_rng.normal_vec(target.dim);
  for (auto& v : st.y) v *= sigma * std::sqrt(t0);

  const double tau = target.a0.tau;
  st.mode_prec = tau > 0.0 ? 1.0 / (tau * tau) : 0.0;
  st.last_prec = g0 * g0 / s2;

  st.posterior.target = &target;
  st.posterior.retarget(st.y, alpha0, st.last_prec);
  auto logp = [&st](const vec& x) { return st.posterior.logpdf(x); };
  auto grad = [&st](const vec& x) { return st.posterior.grad(x); };

  step_controller ctrl{1.0 / (st.mode_prec + st.last_prec),
                       cfg.adjust_factor, cfg.target_accept,
                       cfg.freeze_adaptation};
  st.chain = make_chain(scaled(st.y, 1.0 / alpha0), logp, grad, ctrl);

  // Step-size probe: the precision-based seed above can be orders of
  // magnitude off when the component width tau is zero or tiny (the
  // posterior scale is then set by the target's local geometry, not the
  // likelihood), and the production adjustment factor moves the step only
  // ~1% per event. A short phase with an aggressive factor brings the step
  // into the acceptance band before any score estimate is consumed.
  if (!cfg.freeze_adaptation) {
    constexpr std::size_t kProbeSteps = 64;
    constexpr double kProbeAdjust = 1.5;
    st.chain.ctrl.adjust_factor = kProbeAdjust;
    run_chain(st.chain, logp, grad, kProbeSteps, 0.0, chain_rng);
    st.chain.ctrl.adjust_factor = cfg.adjust_factor;
  }

  const double lam = 0.5 * s2 * t0;  // outer unadjusted update step
  for (std::size_t n = 0; n < cfg.n_init; ++n) {
    st.posterior.retarget(st.y, alpha0, g0 * g0 / s2);
    refresh_chain(st.chain, logp, grad);
    const auto est =
        run_chain(st.chain, logp, grad, cfg.mcmc_steps, cfg.burn_frac,
                  chain_rng);
    vec score_hat(target.dim);
    for (std::size_t j = 0; j < target.dim; ++j)
      score_hat[j] = (alpha0 * est.mean_retained[j] - st.y[j]) / (s2 * t0);
    if (!all_finite(score_hat))
      throw numeric_error(
          "slips: non-finite score estimate during initialization (outer step " +
          std::to_string(n) + ")");
    for (std::size_t j = 0; j < target.dim; ++j)
      st.y[j] += lam * score_hat[j] +
                 std::sqrt(2.0 * lam) * obs_rng.normal();
  }
  if (!all_finite(st.y))
    throw numeric_error("slips: non-finite observation after initialization");
  st.init_accepts = st.chain.accepts;
  st.init_proposals = st.chain.proposals;
  return st;
}

/// Estimate the denoiser at time t by running the persistent chain on the
/// tilted posterior anchored at the current observation.
inline vec estimate_denoiser(slips_state& st, const slips_config& cfg,
                             double t, rng_stream& chain_rng) {
  const double alpha = alpha_and_dot(cfg.schedule, t).alpha;
  const double g = g_of_t(cfg.schedule, t);
  const double prec = g * g / (st.sigma * st.sigma);
  st.chain.ctrl.step_size *=
      (st.mode_prec + st.last_prec) / (st.mode_prec + prec);
  st.last_prec = prec;
  st.posterior.retarget(st.y, alpha, prec);
  auto logp = [&st](const vec& x) { return st.posterior.logpdf(x); };
  auto grad = [&st](const vec& x) { return st.posterior.grad(x); };
  refresh_chain(st.chain, logp, grad);
  const auto est = run_chain(st.chain, logp, grad, cfg.mcmc_steps,
                             cfg.burn_frac, chain_rng);
  return est.mean_retained;
}

/// One Euler-Maruyama update of the observation:
/// Y <- Y + w_k u + sigma sqrt(delta_k) Z.
inline void sde_step(slips_state& st, const time_grid& grid, std::size_t k,
                     const vec& u, rng_stream& obs_rng) {
  if (k >= grid.steps())
    throw std::invalid_argument("slips: SDE step index out of range");
  const double noise = st.sigma * std::sqrt(grid.delta[k]);
  for (std::size_t j = 0; j < st.y.size(); ++j)
    st.y[j] += grid.w[k] * u[j] + noise * obs_rng.normal();
}

struct slips_run_diag {
  std::uint64_t run_id = 0;
  double init_accept_rate = 0.0;
  double main_accept_rate = 0.0;
  double final_step_size = 0.0;
};

struct slips_run_output {
  vec sample;  // final denoiser estimate
  slips_run_diag diag;
};

/// One full run: initialization, K SDE steps over the SNR grid, and a final
/// denoiser estimate at the terminal time, which is the returned sample.
inline slips_run_output slips_run(const target_model& target,
                                  const slips_config& cfg,
                                  std::uint64_t run_id) {
  validate(cfg, target);
  const time_grid grid = snr_grid(cfg.schedule, cfg.t0, cfg.eta, cfg.K);
  rng_stream obs_rng(cfg.seed, run_id, rng_phase::observation);
  rng_stream chain_rng(cfg.seed, run_id, rng_phase::chain);

  slips_state st = init_observation(target, cfg, obs_rng, chain_rng);
  for (std::size_t k = 0; k < grid.steps(); ++k) {
    const vec u = estimate_denoiser(st, cfg, grid.t[k], chain_rng);
    if (!all_finite(u))
      throw numeric_error("slips: non-finite denoiser estimate at step " +
                          std::to_string(k) + " (t=" +
                          std::to_string(grid.t[k]) + ", run " +
                          std::to_string(run_id) + ")");
    sde_step(st, grid, k, u, obs_rng);
    if (!all_finite(st.y))
      throw numeric_error("slips: non-finite observation after step " +
                          std::to_string(k) + " (run " +
                          std::to_string(run_id) + ")");
  }
  vec final_u = estimate_denoiser(st, cfg, grid.t.back(), chain_rng);
  if (!all_finite(final_u))
    throw numeric_error("slips: non-finite terminal denoiser (run " +
                        std::to_string(run_id) + ")");

  slips_run_output out;
  out.sample = std::move(final_u);
  out.diag.run_id = run_id;
  out.diag.init_accept_rate =
      st.init_proposals == 0
          ? 0.0
          : static_cast<double>(st.init_accepts) /
                static_cast<double>(st.init_proposals);
  const std::uint64_t main_props = st.chain.proposals - st.init_proposals;
  out.diag.main_accept_rate =
      main_props == 0 ? 0.0
                      : static_cast<double>(st.chain.accepts -
                                            st.init_accepts) /
                            static_cast<double>(main_props);
  out.diag.final_step_size = st.chain.ctrl.step_size;
  return out;
}

struct batch_diagnostics {
  std::size_t n_runs = 0;
  std::size_t n_aborted = 0;
  double mean_init_accept = 0.0;
  double mean_main_accept = 0.0;
  double min_main_accept = 0.0;
  double max_main_accept = 0.0;
  double mean_final_step = 0.0;
  std::vector<std::string> abort_reasons;  // capped sample of messages
};

struct batch_output {
  std::vector<vec> samples;  // one per successful run, run order
  std::vector<slips_run_diag> run_diags;  // aligned with samples
  batch_diagnostics diag;
};

/// Run n_runs independent replicas (run ids 0..n-1). Results are identical
/// for any worker count because every run derives its own random streams.
/// Runs that abort on non-finite values are dropped and counted; if every
/// run aborts, the batch itself fails.
inline batch_output slips_run_batch(const target_model& target,
                                    const slips_config& cfg,
                                    std::size_t n_runs) {
  validate(cfg, target);
  if (n_runs == 0) throw std::invalid_argument("slips: need n_runs >= 1");
  std::vector<vec> samples(n_runs);
  std::vector<slips_run_diag> diags(n_runs);
  std::vector<char> ok(n_runs, 0);
  std::vector<std::string> reasons(n_runs);

  parallel_for(n_runs, resolve_threads(cfg.threads), [&](std::size_t i) {
    try {
      auto out = slips_run(target, cfg, static_cast<std::uint64_t>(i));
      samples[i] = std::move(out.sample);
      diags[i] = out.diag;
      ok[i] = 1;
    } catch (const numeric_error& e) {
      reasons[i] = e.what();
    }
  });

  batch_output out;
  out.diag.n_runs = n_runs;
  out.diag.min_main_accept = 1.0;
  for (std::size_t i = 0; i < n_runs; ++i) {
    if (!ok[i]) {
      out.diag.n_aborted++;
      if (out.diag.abort_reasons.size() < 8)
        out.diag.abort_reasons.push_back(reasons[i]);
      continue;
    }
    out.samples.push_back(std::move(samples[i]));
    out.run_diags.push_back(diags[i]);
    out.diag.mean_init_accept += diags[i].init_accept_rate;
    out.diag.mean_main_accept += diags[i].main_accept_rate;
    out.diag.mean_final_step += diags[i].final_step_size;
    out.diag.min_main_accept =
        std::min(out.diag.min_main_accept, diags[i].main_accept_rate);
    out.diag.max_main_accept =
        std::max(out.diag.max_main_accept, diags[i].main_accept_rate);
  }
  const std::size_t good = out.samples.size();
  if (good == 0)
    throw numeric_error("slips: every run aborted; first reason: " +
                        (out.diag.abort_reasons.empty()
                             ? std::string("unknown")
                             : out.diag.abort_reasons.front()));
  out.diag.mean_init_accept /= static_cast<double>(good);
  out.diag.mean_main_accept /= static_cast<double>(good);
  out.diag.mean_final_step /= static_cast<double>(good);
  return out;
}

}  // namespace slocal
