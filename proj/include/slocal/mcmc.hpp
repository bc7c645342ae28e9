#pragma once
// mcmc.hpp -- MALA/ULA kernels with per-step geometric step-size adaptation.
//
// The adaptation rule is multiplicative and keyed to each accept/reject:
// with adjust factor f and target rate p, an accept multiplies the step by
// f^(2(1-p)) and a reject divides it by f^(2p). The expected log-step drift
// is then proportional to (acceptance rate - p), so the chain settles where
// the long-run acceptance rate equals p (default 0.75). At p = 1/2 the rule
// reduces to plain multiply/divide by f.

#include <cmath>
#include <cstdint>
#include <functional>

#include "slocal/common.hpp"
#include "slocal/rng.hpp"

namespace slocal {

struct step_controller {
  double step_size = 0.1;     // lambda in the proposal x + lambda grad + sqrt(2 lambda) xi
  double adjust_factor = 1.01;
  double target_rate = 0.75;
  bool frozen = false;
};

inline void validate(const step_controller& c) {
  if (!(c.step_size > 0.0))
    throw std::invalid_argument("mcmc: step size must be positive");
  if (!(c.adjust_factor > 1.0))
    throw std::invalid_argument("mcmc: adjust factor must exceed 1");
  if (!(c.target_rate > 0.0) || !(c.target_rate < 1.0))
    throw std::invalid_argument("mcmc: target rate must lie in (0, 1)");
}

/// One adaptation event. No-op when the controller is frozen.
inline void adapt_step(step_controller& c, bool accepted) {
  if (c.frozen) return;
  const double p = c.target_rate;
  if (accepted)
    c.step_size *= std::pow(c.adjust_factor, 2.0 * (1.0 - p));
  else
    c.step_size /= std::pow(c.adjust_factor, 2.0 * p);
}

/// Chain position with cached target evaluations and running accept counts.
struct chain_state {
  vec x;
  double log_density = 0.0;
  vec grad;
  step_controller ctrl;
  std::uint64_t accepts = 0;
  std::uint64_t proposals = 0;

  double acceptance_rate() const {
    return proposals == 0 ? 0.0
                          : static_cast<double>(accepts) /
                                static_cast<double>(proposals);
  }
};

/// Initialize a chain at x0, caching the target evaluations there.
template <class LogPdf, class Grad>
chain_state make_chain(vec x0, LogPdf&& logpdf, Grad&& grad,
                       step_controller ctrl) {
  validate(ctrl);
  chain_state st;
  st.log_density = logpdf(x0);
  st.grad = grad(x0);
  st.x = std::move(x0);
  st.ctrl = ctrl;
  if (!std::isfinite(st.log_density) || !all_finite(st.grad))
    throw numeric_error("mcmc: target not finite at the chain start");
  return st;
}

/// Re-evaluate the cached target values (after the target itself changed).
template <class LogPdf, class Grad>
void refresh_chain(chain_state& st, LogPdf&& logpdf, Grad&& grad) {
  st.log_density = logpdf(st.x);
  st.grad = grad(st.x);
  if (!std::isfinite(st.log_density) || !all_finite(st.grad))
    throw numeric_error("mcmc: target not finite at the chain position");
}

/// One MALA step. Returns whether the proposal was accepted. Does not adapt
/// the controller; callers decide when adaptation applies.
template <class LogPdf, class Grad>
bool mala_step(chain_state& st, LogPdf&& logpdf, Grad&& grad,
               rng_stream& rng) {
  const double lam = st.ctrl.step_size;
  const std::size_t d = st.x.size();
  const double noise_sd = std::sqrt(2.0 * lam);

  vec prop(d);
  for (std::size_t j = 0; j < d; ++j)
    prop[j] = st.x[j] + lam * st.grad[j] + noise_sd * rng.normal();

  st.proposals++;
  const double lp_prop = logpdf(prop);
  if (!std::isfinite(lp_prop)) return false;  // reject unreachable states
  const vec grad_prop = grad(prop);

  // log q(x | prop) - log q(prop | x) with q(b | a) = N(b; a + lam grad(a), 2 lam I)
  double fwd = 0.0, bwd = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double df = prop[j] - st.x[j] - lam * st.grad[j];
    const double db = st.x[j] - prop[j] - lam * grad_prop[j];
    fwd += df * df;
    bwd += db * db;
  }
  const double log_ratio = lp_prop - st.log_density + (fwd - bwd) / (4.0 * lam);

  if (std::log(rng.uniform()) < log_ratio) {
    st.x = std::move(prop);
    st.log_density = lp_prop;
    st.grad = grad_prop;
    st.accepts++;
    return true;
  }
  return false;
}

/// One unadjusted Langevin step (no accept/reject).
template <class LogPdf, class Grad>
void ula_step(chain_state& st, LogPdf&& logpdf, Grad&& grad, rng_stream& rng) {
  const double lam = st.ctrl.step_size;
  const double noise_sd = std::sqrt(2.0 * lam);
  for (std::size_t j = 0; j < st.x.size(); ++j)
    st.x[j] += lam * st.grad[j] + noise_sd * rng.normal();
  refresh_chain(st, logpdf, grad);
}

struct chain_run_result {
  vec mean_retained;       // average of the last ceil((1-burn) L) positions
  std::size_t accepted = 0;
  std::size_t steps = 0;
};

/// L adapted MALA steps; the retained tail average estimates the target mean.
template <class LogPdf, class Grad>
chain_run_result run_chain(chain_state& st, LogPdf&& logpdf, Grad&& grad,
                           std::size_t L, double burn_frac, rng_stream& rng) {
  if (L < 1) throw std::invalid_argument("mcmc: need at least one step");
  if (!(burn_frac >= 0.0) || !(burn_frac < 1.0))
    throw std::invalid_argument("mcmc: burn fraction must lie in [0, 1)");
  const std::size_t retain = static_cast<std::size_t>(
      std::ceil((1.0 - burn_frac) * static_cast<double>(L)));
  const std::size_t first_kept = L - retain;

  chain_run_result res;
  res.mean_retained.assign(st.x.size(), 0.0);
  for (std::size_t step = 0; step < L; ++step) {
    const bool ok = mala_step(st, logpdf, grad, rng);
    adapt_step(st.ctrl, ok);
    if (ok) res.accepted++;
    if (step >= first_kept) axpy(1.0, st.x, res.mean_retained);
  }
  res.steps = L;
  const double inv = 1.0 / static_cast<double>(retain);
  for (auto& v : res.mean_retained) v *= inv;
  return res;
}

}  // namespace slocal
