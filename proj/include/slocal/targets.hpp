#pragma once
// targets.hpp -- benchmark target distributions and dataset-backed posteriors.
//
// Every target packages an (unnormalized) log density, its gradient, the
// dispersion constants (R, tau) that set the observation noise scale
// sigma = sqrt(R^2 + tau^2), and, where available, an exact sampler used as
// ground truth by the metrics. Included targets:
//   - two-mode benchmark mixture in any dimension ("gmm:<d>")
//   - ring of eight Gaussians in the plane ("8gauss")
//   - four concentric rings in the plane ("rings")
//   - ten-dimensional funnel ("funnel")
//   - Bayesian logistic regression over a loaded dataset ("logreg:<path>")
//   - one-dimensional lattice phi^4 field with tilt h ("phi4:<h>")

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "slocal/common.hpp"
#include "slocal/gmm_analytic.hpp"
#include "slocal/rng.hpp"

namespace slocal {

struct a0_constants {
  double R = 0.0;
  double tau = 0.0;
};

struct target_model {
  std::string name;
  std::size_t dim = 0;
  a0_constants a0;
  std::function<double(const vec&)> log_density;
  std::function<vec(const vec&)> grad_log_density;
  std::function<vec(rng_stream&)> exact_sample;  // empty when unavailable
  std::optional<double> mode_weight_truth;       // known component weight

  bool has_exact_sampler() const { return static_cast<bool>(exact_sample); }
};

namespace detail {

inline void check_dim(std::size_t got, std::size_t want, const char* name) {
  if (got != want)
    throw std::invalid_argument(std::string(name) + ": point has dimension " +
                                std::to_string(got) + ", expected " +
                                std::to_string(want));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Two-mode benchmark mixture: (2/3) N(-(2/3) 1_d, 0.05 I) +
// (1/3) N((4/3) 1_d, 0.05 I).

inline isotropic_mixture benchmark_mixture(std::size_t d) {
  if (d < 1) throw std::invalid_argument("gmm: dimension must be >= 1");
  return make_mixture({2.0 / 3.0, 1.0 / 3.0},
                      {vec(d, -2.0 / 3.0), vec(d, 4.0 / 3.0)}, {0.05, 0.05});
}

inline target_model benchmark_gmm(std::size_t d) {
  auto mix = benchmark_mixture(d);
  target_model t;
  t.name = "gmm:" + std::to_string(d);
  t.dim = d;
  t.a0 = {4.0 / 3.0, std::sqrt(0.05)};
  t.log_density = [mix](const vec& x) { return log_density(mix, x); };
  t.grad_log_density = [mix](const vec& x) { return score(mix, x); };
  t.exact_sample = [mix](rng_stream& rng) { return sample_mixture(mix, rng); };
  t.mode_weight_truth = 2.0 / 3.0;
  return t;
}

// ---------------------------------------------------------------------------
// Eight Gaussians on a radius-10 circle, component covariance 0.7 I_2.

inline isotropic_mixture eight_gaussians_mixture() {
  std::vector<double> w(8, 0.125), v(8, 0.7);
  std::vector<vec> m(8);
  for (int i = 0; i < 8; ++i) {
    const double th = 2.0 * M_PI * i / 8.0;
    m[i] = {10.0 * std::cos(th), 10.0 * std::sin(th)};
  }
  return make_mixture(std::move(w), std::move(m), std::move(v));
}

inline target_model eight_gaussians() {
  auto mix = eight_gaussians_mixture();
  target_model t;
  t.name = "8gauss";
  t.dim = 2;
  t.a0 = {10.0 / std::sqrt(2.0), std::sqrt(0.7)};
  t.log_density = [mix](const vec& x) { return log_density(mix, x); };
  t.grad_log_density = [mix](const vec& x) { return score(mix, x); };
  t.exact_sample = [mix](rng_stream& rng) { return sample_mixture(mix, rng); };
  return t;
}

// ---------------------------------------------------------------------------
// Concentric rings: radius is a four-component normal mixture at 1..4 with
// scale 0.15, angle uniform. In Cartesian coordinates the polar change of
// variables contributes a -log r Jacobian term.

namespace detail {

constexpr double kRingScale = 0.15;
constexpr double kRingVar = kRingScale * kRingScale;
constexpr double kRadiusClamp = 1e-6;

inline double ring_radial_log_density(double r) {
  vec lt(4);
  for (int i = 0; i < 4; ++i) {
    const double c = static_cast<double>(i + 1);
    lt[i] = std::log(0.25) - 0.5 * std::log(2.0 * M_PI * kRingVar) -
            0.5 * (r - c) * (r - c) / kRingVar;
  }
  return log_sum_exp(lt);
}

/// d/dr of ring_radial_log_density.
inline double ring_radial_score(double r) {
  vec lt(4);
  for (int i = 0; i < 4; ++i) {
    const double c = static_cast<double>(i + 1);
    lt[i] = std::log(0.25) - 0.5 * (r - c) * (r - c) / kRingVar;
  }
  const double lz = log_sum_exp(lt);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double c = static_cast<double>(i + 1);
    s += std::exp(lt[i] - lz) * (c - r) / kRingVar;
  }
  return s;
}

}  // namespace detail

inline target_model rings() {
  target_model t;
  t.name = "rings";
  t.dim = 2;
  t.a0 = {4.0 / std::sqrt(2.0), 0.15};
  t.log_density = [](const vec& x) {
    detail::check_dim(x.size(), 2, "rings");
    const double r = std::max(norm(x), detail::kRadiusClamp);
    return detail::ring_radial_log_density(r) - std::log(r) -
           std::log(2.0 * M_PI);
  };
  t.grad_log_density = [](const vec& x) {
    detail::check_dim(x.size(), 2, "rings");
    const double r = std::max(norm(x), detail::kRadiusClamp);
    const double radial = detail::ring_radial_score(r) - 1.0 / r;
    return vec{radial * x[0] / r, radial * x[1] / r};
  };
  t.exact_sample = [](rng_stream& rng) {
    const int ring = static_cast<int>(rng.uniform() * 4.0);
    const double r = std::max(static_cast<double>(std::min(ring, 3) + 1) +
                                  detail::kRingScale * rng.normal(),
                              detail::kRadiusClamp);
    const double th = 2.0 * M_PI * rng.uniform();
    return vec{r * std::cos(th), r * std::sin(th)};
  };
  return t;
}

// ---------------------------------------------------------------------------
// Funnel in dimension 10: x1 ~ N(0, 9), x_i | x1 ~ N(0, e^{x1}) for i >= 2.

inline target_model funnel() {
  constexpr std::size_t d = 10;
  target_model t;
  t.name = "funnel";
  t.dim = d;
  t.a0 = {2.12, 0.0};
  t.log_density = [](const vec& x) {
    detail::check_dim(x.size(), d, "funnel");
    constexpr double kLog2Pi = 1.8378770664093454836;
    double lp = -x[0] * x[0] / 18.0 - 0.5 * (kLog2Pi + std::log(9.0));
    double ssq = 0.0;
    for (std::size_t i = 1; i < d; ++i) ssq += x[i] * x[i];
    lp += -0.5 * ssq * std::exp(-x[0]) -
          0.5 * (d - 1) * (kLog2Pi + x[0]);
    return lp;
  };
  t.grad_log_density = [](const vec& x) {
    detail::check_dim(x.size(), d, "funnel");
    vec g(d);
    double ssq = 0.0;
    for (std::size_t i = 1; i < d; ++i) ssq += x[i] * x[i];
    const double e = std::exp(-x[0]);
    g[0] = -x[0] / 9.0 - 0.5 * (d - 1) + 0.5 * ssq * e;
    for (std::size_t i = 1; i < d; ++i) g[i] = -x[i] * e;
    return g;
  };
  t.exact_sample = [](rng_stream& rng) {
    vec x(d);
    x[0] = 3.0 * rng.normal();
    const double sd = std::exp(0.5 * x[0]);
    for (std::size_t i = 1; i < d; ++i) x[i] = sd * rng.normal();
    return x;
  };
  return t;
}

// ---------------------------------------------------------------------------
// Lattice phi^4 field on d interior sites with Dirichlet boundaries:
//   log pi_h(phi) = -beta [ (a d / 2) sum_{i=1}^{d+1} (phi_i - phi_{i-1})^2
//                           + 1/(4 a d) sum_{i=1}^{d} (1 - phi_i^2)^2
//                           + h sum_{i=1}^{d} phi_i ],   phi_0 = phi_{d+1} = 0.

struct phi4_model {
  std::size_t d = 100;
  double a = 0.1;
  double beta = 20.0;
  double h = 0.0;

  // The local-field term h·Σφ couples without the inverse temperature: with a
  // tilt of β·h·Σφ the positive mode ceases to be a stationary point once
  // a·d·h exceeds 2/(3√3) (a discrete maximum principle forces any stationary
  // configuration below zero), so the tilted two-mode structure studied at
  // field strengths up to h = 0.1 only exists under this convention.
  double log_density(const vec& phi) const {
    detail::check_dim(phi.size(), d, "phi4");
    const double ad = a * static_cast<double>(d);
    double grad_sq = 0.0, quart = 0.0, lin = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double diff = phi[i] - prev;
      grad_sq += diff * diff;
      const double q = 1.0 - phi[i] * phi[i];
      quart += q * q;
      lin += phi[i];
      prev = phi[i];
    }
    grad_sq += prev * prev;  // boundary term phi_{d+1} = 0
    return -beta * (0.5 * ad * grad_sq + quart / (4.0 * ad)) - h * lin;
  }

  vec grad(const vec& phi) const {
    detail::check_dim(phi.size(), d, "phi4");
    const double ad = a * static_cast<double>(d);
    vec g(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double left = i == 0 ? 0.0 : phi[i - 1];
      const double right = i + 1 == d ? 0.0 : phi[i + 1];
      g[i] = -beta * (ad * (2.0 * phi[i] - left - right) -
                      (1.0 - phi[i] * phi[i]) * phi[i] / ad) -
             h;
    }
    return g;
  }

  /// Tridiagonal Hessian of log_density: diag (size d) and super/subdiagonal
  /// (size d-1, symmetric).
  void hessian_tridiag(const vec& phi, vec& diag, vec& off) const {
    detail::check_dim(phi.size(), d, "phi4");
    const double ad = a * static_cast<double>(d);
    diag.assign(d, 0.0);
    off.assign(d - 1, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      diag[i] = -beta * (2.0 * ad - (1.0 - 3.0 * phi[i] * phi[i]) / ad);
    for (std::size_t i = 0; i + 1 < d; ++i) off[i] = beta * ad;
  }
};

inline target_model phi4_target(double h, std::size_t d = 100) {
  if (d < 2) throw std::invalid_argument("phi4: dimension must be >= 2");
  phi4_model model;
  model.d = d;
  model.h = h;
  target_model t;
  char buf[40];
  std::snprintf(buf, sizeof buf, "phi4:%g", h);
  t.name = buf;
  t.dim = d;
  t.a0 = {4.5, 1e-2};
  t.log_density = [model](const vec& x) { return model.log_density(x); };
  t.grad_log_density = [model](const vec& x) { return model.grad(x); };
  return t;
}

// ---------------------------------------------------------------------------
// Bayesian logistic regression. Features are z-scored at load time; the
// parameter vector stacks the p weights and the intercept last.

struct labeled_dataset {
  std::vector<vec> x;  // n rows of p standardized features
  std::vector<int> y;  // binary labels in {0, 1}

  std::size_t n() const { return x.size(); }
  std::size_t p() const { return x.empty() ? 0 : x.front().size(); }
};

namespace detail {

inline bool parse_token(const std::string& tok, double& out) {
  std::size_t used = 0;
  try {
    out = std::stod(tok, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == tok.size();
}

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : line) {
    if (c == ',' || c == ' ' || c == '\t' || c == '\r' || c == ';') {
      if (!cur.empty()) toks.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

}  // namespace detail

/// Load a delimited numeric table; the last column is the binary label
/// ({0,1} or {-1,+1}). A non-numeric first row is treated as a header.
/// Features are standardized to zero mean and unit variance (deviation
/// floored at 1e-8).
inline labeled_dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("dataset: cannot open '" + path + "'");
  labeled_dataset ds;
  std::string line;
  bool first_content_row = true;
  std::size_t cols = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto toks = detail::split_row(line);
    if (toks.empty()) continue;
    std::vector<double> row(toks.size());
    bool numeric = true;
    for (std::size_t j = 0; j < toks.size(); ++j)
      if (!detail::parse_token(toks[j], row[j])) {
        numeric = false;
        break;
      }
    if (!numeric) {
      if (first_content_row) {  // header
        first_content_row = false;
        continue;
      }
      throw std::invalid_argument("dataset: non-numeric row in '" + path +
                                  "'");
    }
    first_content_row = false;
    if (cols == 0) {
      cols = row.size();
      if (cols < 2)
        throw std::invalid_argument(
            "dataset: need at least one feature column plus a label");
    } else if (row.size() != cols) {
      throw std::invalid_argument("dataset: ragged rows in '" + path + "'");
    }
    const double lab = row.back();
    int yv;
    if (lab == 0.0 || lab == -1.0)
      yv = 0;
    else if (lab == 1.0)
      yv = 1;
    else
      throw std::invalid_argument(
          "dataset: labels must be in {0,1} or {-1,+1}, got " +
          std::to_string(lab));
    row.pop_back();
    ds.x.push_back(std::move(row));
    ds.y.push_back(yv);
  }
  if (ds.x.empty())
    throw std::invalid_argument("dataset: no data rows in '" + path + "'");

  // z-score each feature column
  const std::size_t n = ds.n(), p = ds.p();
  for (std::size_t j = 0; j < p; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += ds.x[i][j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = ds.x[i][j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double sd = std::max(std::sqrt(var), 1e-8);
    for (std::size_t i = 0; i < n; ++i) ds.x[i][j] = (ds.x[i][j] - mu) / sd;
  }
  return ds;
}

/// log(1 + e^z) without overflow.
inline double log1p_exp(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z))
                  : std::exp(z) / (1.0 + std::exp(z));
}

/// Posterior over (weights, intercept) with prior N(0, I) x N(0, 2.5^2) and
/// Bernoulli(sigmoid(w.x + b)) likelihood. Parameter dimension is p + 1.
inline target_model bayesian_logreg(const labeled_dataset& ds,
                                    const std::string& label = "logreg") {
  if (ds.n() == 0) throw std::invalid_argument("logreg: empty dataset");
  const std::size_t p = ds.p();
  const std::size_t dim = p + 1;
  constexpr double kInterceptVar = 2.5 * 2.5;
  target_model t;
  t.name = label;
  t.dim = dim;
  t.a0 = {2.5 / std::sqrt(static_cast<double>(dim)), 0.0};
  // copy the dataset into the closures so the model owns its data
  auto xs = ds.x;
  auto ys = ds.y;
  t.log_density = [xs, ys, p](const vec& th) {
    detail::check_dim(th.size(), p + 1, "logreg");
    double lp = -th[p] * th[p] / (2.0 * kInterceptVar);
    for (std::size_t j = 0; j < p; ++j) lp -= 0.5 * th[j] * th[j];
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = th[p];
      for (std::size_t j = 0; j < p; ++j) z += th[j] * xs[i][j];
      lp += (ys[i] == 1 ? z : 0.0) - log1p_exp(z);
    }
    return lp;
  };
  t.grad_log_density = [xs, ys, p](const vec& th) {
    detail::check_dim(th.size(), p + 1, "logreg");
    vec g(p + 1, 0.0);
    for (std::size_t j = 0; j < p; ++j) g[j] = -th[j];
    g[p] = -th[p] / kInterceptVar;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = th[p];
      for (std::size_t j = 0; j < p; ++j) z += th[j] * xs[i][j];
      const double resid = static_cast<double>(ys[i]) - sigmoid(z);
      for (std::size_t j = 0; j < p; ++j) g[j] += resid * xs[i][j];
      g[p] += resid;
    }
    return g;
  };
  return t;
}

// ---------------------------------------------------------------------------
// Config-string dispatch: "gmm:<d>" | "8gauss" | "rings" | "funnel" |
// "logreg:<path>" | "phi4:<h>".

inline target_model parse_target(const std::string& text) {
  if (text == "8gauss") return eight_gaussians();
  if (text == "rings") return rings();
  if (text == "funnel") return funnel();
  if (text.rfind("gmm:", 0) == 0) {
    const std::string arg = text.substr(4);
    double d = 0.0;
    if (!detail::parse_token(arg, d) || d < 1.0 || d != std::floor(d))
      throw std::invalid_argument("target: bad dimension in '" + text + "'");
    return benchmark_gmm(static_cast<std::size_t>(d));
  }
  if (text.rfind("phi4:", 0) == 0) {
    const std::string arg = text.substr(5);
    double h = 0.0;
    if (!detail::parse_token(arg, h))
      throw std::invalid_argument("target: bad tilt in '" + text + "'");
    return phi4_target(h);
  }
  if (text.rfind("logreg:", 0) == 0) {
    const std::string path = text.substr(7);
    return bayesian_logreg(load_dataset(path), text);
  }
  throw std::invalid_argument(
      "target: unknown spelling '" + text +
      "' (expected gmm:<d>, 8gauss, rings, funnel, logreg:<path>, phi4:<h>)");
}

}  // namespace slocal
