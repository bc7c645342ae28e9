#pragma once
// metrics.hpp -- sample-quality metrics:
//   - sliced 2-Wasserstein distance (random 1-D projections, quantile coupling)
//   - entropy-regularized 2-Wasserstein distance (log-domain Sinkhorn)
//   - sliced Kolmogorov-Smirnov statistic
//   - closed-form W2 between isotropic Gaussians
//   - mode-weight and predictive log-likelihood estimators
//   - saddle-point (Laplace) mode-ratio estimates for the lattice field model

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/rng.hpp"
#include "slocal/targets.hpp"

namespace slocal {

namespace detail {

inline void check_sets(const sample_set& a, const sample_set& b,
                       const char* name) {
  if (a.empty() || b.empty())
    throw std::invalid_argument(std::string(name) +
                                ": sample sets must be nonempty");
  const std::size_t d = a.front().size();
  if (d == 0)
    throw std::invalid_argument(std::string(name) + ": zero-dimensional set");
  for (const auto& x : a)
    if (x.size() != d)
      throw std::invalid_argument(std::string(name) + ": ragged sample set");
  for (const auto& x : b)
    if (x.size() != d)
      throw std::invalid_argument(std::string(name) +
                                  ": dimension mismatch between sets");
}

/// Squared 1-D W2 between uniform empirical measures of (possibly different)
/// sizes: sorts the values and integrates the squared quantile gap over the
/// merged quantile grid.
inline double w2_sq_1d(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t na = a.size(), nb = b.size();
  double acc = 0.0, level = 0.0;
  std::size_t i = 0, j = 0;
  while (i < na && j < nb) {
    const double next_a = static_cast<double>(i + 1) / na;
    const double next_b = static_cast<double>(j + 1) / nb;
    const double upper = std::min(next_a, next_b);
    const double diff = a[i] - b[j];
    acc += diff * diff * (upper - level);
    level = upper;
    if (next_a <= upper) ++i;
    if (next_b <= upper) ++j;
  }
  return acc;
}

/// One-sample draw of a uniformly random unit direction.
inline vec random_direction(rng_stream& rng, std::size_t d) {
  vec u(d);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (auto& v : u) {
      v = rng.normal();
      n2 += v * v;
    }
  } while (n2 < 1e-300);
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& v : u) v *= inv;
  return u;
}

inline void project(const sample_set& s, const vec& dir,
                    std::vector<double>& out) {
  out.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = dot(s[i], dir);
}

/// Two-sample Kolmogorov-Smirnov statistic on sorted 1-D values.
inline double ks_1d(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t na = a.size(), nb = b.size();
  std::size_t i = 0, j = 0;
  double ks = 0.0;
  while (i < na || j < nb) {
    const double va = i < na ? a[i] : kInf;
    const double vb = j < nb ? b[j] : kInf;
    const double v = std::min(va, vb);
    while (i < na && a[i] == v) ++i;
    while (j < nb && b[j] == v) ++j;
    ks = std::max(ks, std::fabs(static_cast<double>(i) / na -
                                static_cast<double>(j) / nb));
  }
  return ks;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sliced metrics.

inline double sliced_w2(const sample_set& a, const sample_set& b,
                        std::size_t n_proj = 128, std::uint64_t seed = 0) {
  detail::check_sets(a, b, "sliced_w2");
  if (n_proj == 0)
    throw std::invalid_argument("sliced_w2: n_proj must be positive");
  const std::size_t d = a.front().size();
  rng_stream rng(seed, 0, rng_phase::metrics);
  std::vector<double> pa, pb;
  double acc = 0.0;
  for (std::size_t k = 0; k < n_proj; ++k) {
    const vec dir = detail::random_direction(rng, d);
    detail::project(a, dir, pa);
    detail::project(b, dir, pb);
    acc += detail::w2_sq_1d(pa, pb);
  }
  return std::sqrt(acc / static_cast<double>(n_proj));
}

inline double sliced_ks(const sample_set& a, const sample_set& b,
                        std::size_t n_proj = 128, std::uint64_t seed = 0) {
  detail::check_sets(a, b, "sliced_ks");
  if (n_proj == 0)
    throw std::invalid_argument("sliced_ks: n_proj must be positive");
  const std::size_t d = a.front().size();
  rng_stream rng(seed, 0, rng_phase::metrics);
  std::vector<double> pa, pb;
  double acc = 0.0;
  for (std::size_t k = 0; k < n_proj; ++k) {
    const vec dir = detail::random_direction(rng, d);
    detail::project(a, dir, pa);
    detail::project(b, dir, pb);
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    acc += detail::ks_1d(pa, pb);
  }
  return acc / static_cast<double>(n_proj);
}

// ---------------------------------------------------------------------------
// Entropy-regularized 2-Wasserstein distance.
//
// Minimizes <P, C> - eps * H(P) over couplings P of the uniform empirical
// measures, where C_ij = ||a_i - b_j||^2 and H(P) = -sum_ij P_ij log P_ij is
// the plan entropy. The reported scalar is sqrt(max(objective, 0)): on
// near-identical sets the optimal objective is slightly negative (it is
// bounded below by -eps log(nm)), where the distance is statistically
// indistinguishable from zero, so the square root clamps there.

inline constexpr std::size_t kEntropicSizeCap = 4096;

struct entropic_result {
  double value = 0.0;       ///< sqrt(max(objective, 0))
  double objective = 0.0;   ///< <P,C> - eps * H(P) at the converged plan
  double residual = 0.0;    ///< L_inf marginal violation at exit
  std::size_t iterations = 0;
  bool converged = false;
};

inline entropic_result entropic_w2_detailed(const sample_set& a,
                                            const sample_set& b, double eps) {
  detail::check_sets(a, b, "entropic_w2");
  if (!(eps > 0.0))
    throw std::invalid_argument("entropic_w2: eps must be positive");
  if (a.size() > kEntropicSizeCap || b.size() > kEntropicSizeCap)
    throw std::invalid_argument(
        "entropic_w2: sample sets are capped at " +
        std::to_string(kEntropicSizeCap) + " points (got " +
        std::to_string(a.size()) + " x " + std::to_string(b.size()) + ")");

  const std::size_t n = a.size(), m = b.size();
  std::vector<double> c(n * m);
  double max_c = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double v = sq_dist(a[i], b[j]);
      c[i * m + j] = v;
      max_c = std::max(max_c, v);
    }

  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  std::vector<double> f(n, 0.0), g(m, 0.0);

  // Stationarity of the objective gives P_ij = exp((f_i + g_j - C_ij)/eps - 1)
  // with the potentials fixed by the marginal constraints; alternating the
  // exact row/column solves is the Sinkhorn iteration, run in the log domain.
  // Warm starts at larger eps (halved down to the requested value) keep the
  // effective kernel well conditioned when eps << max C.
  const auto row_update = [&](double e) {
    for (std::size_t i = 0; i < n; ++i) {
      const double* ci = &c[i * m];
      double mx = -kInf;
      for (std::size_t j = 0; j < m; ++j) mx = std::max(mx, g[j] - ci[j]);
      double s = 0.0;
      const double inv_e = 1.0 / e;
      for (std::size_t j = 0; j < m; ++j)
        s += std::exp((g[j] - ci[j] - mx) * inv_e);
      f[i] = e * (log_a + 1.0) - (mx + e * std::log(s));
    }
  };
  const auto col_update = [&](double e) {
    const double inv_e = 1.0 / e;
    for (std::size_t j = 0; j < m; ++j) {
      double mx = -kInf;
      for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, f[i] - c[i * m + j]);
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s += std::exp((f[i] - c[i * m + j] - mx) * inv_e);
      g[j] = e * (log_b + 1.0) - (mx + e * std::log(s));
    }
  };
  // After a column update the column marginals are exact by construction, so
  // the row marginals carry the whole violation.
  const auto row_residual = [&](double e) {
    const double inv_e = 1.0 / e;
    const double target = 1.0 / static_cast<double>(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* ci = &c[i * m];
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j)
        s += std::exp((f[i] + g[j] - ci[j]) * inv_e - 1.0);
      worst = std::max(worst, std::fabs(s - target));
    }
    return worst;
  };

  constexpr std::size_t kMaxIters = 10000;
  constexpr std::size_t kWarmIters = 30;
  constexpr double kTol = 1e-6;

  entropic_result out;
  std::size_t used = 0;
  double eps_run = std::max(eps, max_c / 16.0);
  while (eps_run > eps && used + kWarmIters < kMaxIters / 2) {
    for (std::size_t it = 0; it < kWarmIters; ++it) {
      row_update(eps_run);
      col_update(eps_run);
      ++used;
    }
    eps_run = std::max(eps, eps_run * 0.5);
  }
  while (used < kMaxIters) {
    row_update(eps);
    col_update(eps);
    ++used;
    out.residual = row_residual(eps);
    if (out.residual <= kTol) {
      out.converged = true;
      break;
    }
  }
  out.iterations = used;
  if (!out.converged) out.residual = row_residual(eps);

  double cost = 0.0, plogp = 0.0;
  const double inv_e = 1.0 / eps;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ci = &c[i * m];
    for (std::size_t j = 0; j < m; ++j) {
      const double lp = (f[i] + g[j] - ci[j]) * inv_e - 1.0;
      const double p = std::exp(lp);
      cost += p * ci[j];
      plogp += p * lp;
    }
  }
  out.objective = cost + eps * plogp;
  out.value = std::sqrt(std::max(out.objective, 0.0));
  return out;
}

inline double entropic_w2(const sample_set& a, const sample_set& b,
                          double eps) {
  return entropic_w2_detailed(a, b, eps).value;
}

// ---------------------------------------------------------------------------
// Closed-form W2 between isotropic Gaussians N(m1, g1^2 I) and N(m2, g2^2 I).

inline double gaussian_w2(const vec& m1, double g1, const vec& m2, double g2) {
  if (m1.size() != m2.size())
    throw std::invalid_argument("gaussian_w2: mean dimension mismatch");
  if (!(g1 > 0.0) || !(g2 > 0.0))
    throw std::invalid_argument("gaussian_w2: scales must be positive");
  const double gap = g1 - g2;
  return std::sqrt(sq_dist(m1, m2) +
                   static_cast<double>(m1.size()) * gap * gap);
}

// ---------------------------------------------------------------------------
// Target-specific estimators.

/// Fraction of samples lying in the strictly negative orthant.
inline double mode_weight(const sample_set& samples) {
  if (samples.empty())
    throw std::invalid_argument("mode_weight: empty sample set");
  std::size_t hits = 0;
  for (const auto& x : samples) {
    bool all_neg = true;
    for (double v : x)
      if (!(v < 0.0)) {
        all_neg = false;
        break;
      }
    if (all_neg) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

/// Mean over posterior samples (w, b) and test points of
/// log Bernoulli(y; sigmoid(w.x + b)).
inline double predictive_ll(const sample_set& samples,
                            const labeled_dataset& test) {
  if (samples.empty())
    throw std::invalid_argument("predictive_ll: empty sample set");
  if (test.x.empty())
    throw std::invalid_argument("predictive_ll: empty test set");
  const std::size_t p = test.x.front().size();
  for (const auto& x : test.x)
    if (x.size() != p)
      throw std::invalid_argument("predictive_ll: ragged test features");
  if (test.y.size() != test.x.size())
    throw std::invalid_argument("predictive_ll: label/feature count mismatch");
  for (const auto& th : samples)
    if (th.size() != p + 1)
      throw std::invalid_argument(
          "predictive_ll: sample dimension must be feature dim + 1");

  double acc = 0.0;
  for (const auto& th : samples) {
    for (std::size_t j = 0; j < test.x.size(); ++j) {
      double z = th[p];
      for (std::size_t k = 0; k < p; ++k) z += th[k] * test.x[j][k];
      acc += (test.y[j] == 1 ? z : 0.0) - log1p_exp(z);
    }
  }
  return acc / (static_cast<double>(samples.size()) *
                static_cast<double>(test.x.size()));
}

// ---------------------------------------------------------------------------
// Laplace (saddle-point) mode-ratio estimates for the lattice field model.

namespace detail {

/// Solves (-H + lambda I) x = rhs for a symmetric tridiagonal H given as
/// (diag, off); returns false when the shifted matrix is not positive
/// definite (a pivot fails to stay positive).
inline bool shifted_tridiag_solve(const vec& diag, const vec& off,
                                  double lambda, const vec& rhs, vec& x) {
  const std::size_t d = diag.size();
  x.assign(d, 0.0);
  vec u(d), w(d);  // LDL^T-style forward sweep
  u[0] = -diag[0] + lambda;
  if (!(u[0] > 0.0)) return false;
  w[0] = rhs[0];
  for (std::size_t i = 1; i < d; ++i) {
    const double l = -off[i - 1] / u[i - 1];
    u[i] = -diag[i] + lambda - l * (-off[i - 1]);
    if (!(u[i] > 0.0)) return false;
    w[i] = rhs[i] - l * w[i - 1];
  }
  x[d - 1] = w[d - 1] / u[d - 1];
  for (std::size_t i = d - 1; i-- > 0;)
    x[i] = (w[i] - (-off[i]) * x[i + 1]) / u[i];
  return true;
}

/// Log-determinant of -H for a symmetric tridiagonal H; requires -H positive
/// definite (the stationary point is a local maximum).
inline double tridiag_logdet_neg(const vec& diag, const vec& off) {
  const std::size_t d = diag.size();
  double u = -diag[0];
  if (!(u > 0.0))
    throw numeric_error("laplace ratio: stationary point is not a local maximum");
  double tot = std::log(u);
  for (std::size_t i = 1; i < d; ++i) {
    u = -diag[i] - off[i - 1] * off[i - 1] / u;
    if (!(u > 0.0))
      throw numeric_error(
          "laplace ratio: stationary point is not a local maximum");
    tot += std::log(u);
  }
  return tot;
}

/// Damped (backtracking) Newton ascent on the field log density. Indefinite
/// Hessians are handled by a diagonal shift grown until the Newton system is
/// positive definite.
inline vec newton_maximize(const phi4_model& model, vec phi) {
  constexpr std::size_t kMaxIters = 200;
  constexpr double kGradTol = 1e-10;
  vec grad, diag, off, step;
  double gnorm = kInf;
  for (std::size_t it = 0; it < kMaxIters; ++it) {
    grad = model.grad(phi);
    gnorm = norm(grad);
    if (gnorm <= kGradTol) return phi;
    model.hessian_tridiag(phi, diag, off);
    double lambda = 0.0;
    while (!shifted_tridiag_solve(diag, off, lambda, grad, step))
      lambda = lambda == 0.0 ? 1e-6 : lambda * 10.0;
    const double slope = dot(grad, step);  // > 0: ascent direction
    const double f0 = model.log_density(phi);
    double s = 1.0;
    vec trial(phi.size());
    while (true) {
      for (std::size_t i = 0; i < phi.size(); ++i)
        trial[i] = phi[i] + s * step[i];
      if (model.log_density(trial) >= f0 + 1e-4 * s * slope) break;
      s *= 0.5;
      if (s < 1e-14) break;
    }
    phi = trial;
  }
  grad = model.grad(phi);
  gnorm = norm(grad);
  if (gnorm > 1e-8)
    throw numeric_error(
        "laplace ratio: Newton stalled with gradient norm " +
        std::to_string(gnorm));
  return phi;
}

/// Smoothed kink profile clipped to zero at the boundaries: site i rises as
/// tanh(distance to the nearer boundary / (a d)).
inline vec kink_profile(const phi4_model& model) {
  const double width = model.a * static_cast<double>(model.d);
  vec phi(model.d);
  for (std::size_t i = 0; i < model.d; ++i) {
    const double dist = static_cast<double>(
        std::min(i + 1, model.d - i));
    phi[i] = std::tanh(dist / width);
  }
  return phi;
}

}  // namespace detail

/// Ratio of mode masses w_- / w_+ of the tilted field model estimated by a
/// Laplace approximation around the two local maxima. Order 0 compares the
/// peak densities; order 2 additionally weighs each peak by
/// |det H|^{-1/2} through tridiagonal log-determinants.
inline double phi4_laplace_ratio(const phi4_model& model, int order) {
  if (order != 0 && order != 2)
    throw std::invalid_argument("phi4_laplace_ratio: order must be 0 or 2");
  const vec profile = detail::kink_profile(model);
  vec neg_start(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) neg_start[i] = -profile[i];
  const vec phi_plus = detail::newton_maximize(model, profile);
  const vec phi_minus = detail::newton_maximize(model, neg_start);
  double log_ratio =
      model.log_density(phi_minus) - model.log_density(phi_plus);
  if (order == 2) {
    vec diag, off;
    model.hessian_tridiag(phi_minus, diag, off);
    const double ld_minus = detail::tridiag_logdet_neg(diag, off);
    model.hessian_tridiag(phi_plus, diag, off);
    const double ld_plus = detail::tridiag_logdet_neg(diag, off);
    log_ratio -= 0.5 * (ld_minus - ld_plus);
  }
  return std::exp(log_ratio);
}

inline double phi4_laplace_ratio(double h, int order) {
  phi4_model model;
  model.h = h;
  return phi4_laplace_ratio(model, order);
}

}  // namespace slocal
