#pragma once
// cli_harness.hpp -- experiment configuration, named presets, orchestration,
// and artifact persistence for the `slocal` command-line tool.
//
// A run is described by a flat key=value configuration assembled from four
// layers with precedence  flags > file > preset > defaults.  Unknown keys are
// rejected by name.  Every artifact written by run_experiment embeds a 64-bit
// hash of the sampling-relevant configuration (target, algorithm, schedule,
// t0, eta, k, mcmc-steps, n-init, runs, seed) so that outputs from the same
// experiment can be matched up later; the metric list, output directory, and
// thread count do not enter the hash because they cannot change the samples.
//
// Artifacts per run, all written by the coordinating thread only:
//   samples.csv      one row per successful run, shortest round-trip decimals
//   metrics.json     [{metric, value, n, seed, config_hash}, ...]
//   diagnostics.json acceptance traces, step sizes, weight summaries
//   plotdata.csv     metric-vs-dimension / metric-vs-budget series rows
// A marker file INCOMPLETE is created first and removed last, so a crash in
// the middle leaves the directory visibly flagged.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slocal/baselines.hpp"
#include "slocal/common.hpp"
#include "slocal/concavity.hpp"
#include "slocal/ideal_ei.hpp"
#include "slocal/metrics.hpp"
#include "slocal/parallel.hpp"
#include "slocal/rng.hpp"
#include "slocal/schedule.hpp"
#include "slocal/slips.hpp"
#include "slocal/targets.hpp"

namespace slocal {

using kv_map = std::map<std::string, std::string>;

enum class algo_kind { slips, ideal, ais, smc };

inline algo_kind parse_algo(const std::string& text) {
  if (text == "slips") return algo_kind::slips;
  if (text == "ideal") return algo_kind::ideal;
  if (text == "ais") return algo_kind::ais;
  if (text == "smc") return algo_kind::smc;
  throw std::invalid_argument("config: invalid value for key 'algo': '" +
                              text + "' (expected slips|ideal|ais|smc)");
}

inline const char* algo_str(algo_kind a) {
  switch (a) {
    case algo_kind::slips: return "slips";
    case algo_kind::ideal: return "ideal";
    case algo_kind::ais: return "ais";
    default: return "smc";
  }
}

struct experiment_config {
  std::string target_spec;
  algo_kind algorithm = algo_kind::slips;
  schedule_spec schedule = schedule_spec::standard();
  double t0 = 0.25;
  double eta = 5.0;
  std::size_t k = 1024;        // SDE steps / annealing levels
  std::size_t mcmc_steps = 32; // MALA steps per posterior / per level
  std::size_t n_init = 20;     // warmup updates (SLIPS only)
  std::size_t n_runs = 4096;   // independent runs / particles
  std::uint64_t seed = 0;
  std::vector<std::string> metrics;
  std::string out_dir;
  unsigned threads = 0;  // 0 = hardware count, capped by SLOCAL_THREADS
};

namespace detail {

// Shortest decimal text that round-trips to the same double.
inline std::string num_rt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return std::string(buf);
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline double parse_num(const std::string& text, const std::string& key) {
  try {
    return slocal::detail::parse_double(text, key);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("config: invalid value for key '" + key +
                                "': '" + text + "'");
  }
}

inline std::size_t parse_count(const std::string& text, const std::string& key,
                               std::size_t min_value) {
  const double v = parse_num(text, key);
  if (!(v >= static_cast<double>(min_value)) || v != std::floor(v) ||
      v > 9.0e15)
    throw std::invalid_argument("config: invalid value for key '" + key +
                                "': '" + text + "' (need an integer >= " +
                                std::to_string(min_value) + ")");
  return static_cast<std::size_t>(v);
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "target", "algo",    "schedule", "t0",  "eta",     "k",
      "mcmc-steps", "n-init", "runs",  "seed", "metrics", "out",
      "threads", "preset"};
  return keys;
}

inline void reject_unknown(const kv_map& kv, const char* where) {
  for (const auto& [key, value] : kv) {
    (void)value;
    if (!known_keys().count(key))
      throw std::invalid_argument(std::string("config: unknown key '") + key +
                                  "' in " + where);
  }
}

}  // namespace detail

// --- metric-name grammar ----------------------------------------------------
//
//   sliced-w2            sliced Wasserstein-2 against exact samples
//   sliced-ks            sliced Kolmogorov-Smirnov against exact samples
//   entropic-w2[:eps]    entropic W2 against exact samples (default eps 0.05)
//   mode-weight          fraction of samples in the all-negative orthant
//   mode-weight-error    |mode-weight - known truth|
//   predictive-ll:PATH   mean predictive log-likelihood on a labeled CSV

struct metric_spec {
  std::string name;   // full spelling as given
  std::string kind;   // grammar head
  double eps = 0.05;  // entropic-w2 regularization
  std::string path;   // predictive-ll dataset
};

inline metric_spec parse_metric(const std::string& text) {
  metric_spec m;
  m.name = text;
  if (text == "sliced-w2" || text == "sliced-ks" || text == "mode-weight" ||
      text == "mode-weight-error") {
    m.kind = text;
    return m;
  }
  if (text == "entropic-w2") {
    m.kind = text;
    return m;
  }
  if (text.rfind("entropic-w2:", 0) == 0) {
    m.kind = "entropic-w2";
    m.eps = detail::parse_num(text.substr(12), "metrics");
    if (!(m.eps > 0.0))
      throw std::invalid_argument(
          "config: invalid value for key 'metrics': '" + text +
          "' (regularization must be positive)");
    return m;
  }
  if (text.rfind("predictive-ll:", 0) == 0) {
    m.kind = "predictive-ll";
    m.path = text.substr(14);
    if (m.path.empty())
      throw std::invalid_argument(
          "config: invalid value for key 'metrics': '" + text +
          "' (missing dataset path)");
    return m;
  }
  throw std::invalid_argument(
      "config: unknown metric '" + text +
      "' (expected sliced-w2, sliced-ks, entropic-w2[:eps], mode-weight, "
      "mode-weight-error, or predictive-ll:<path>)");
}

// --- presets ----------------------------------------------------------------
//
// Experiment presets `table4:<target>:<scheme>` carry the per-target tuned
// (eta, t0) pair for each schedule flavor plus the matching target spelling,
// schedule string, and inner chain length.  Scheme spellings: standard,
// geom11 = geom:1,1, geom21 = geom:2,1.  The logistic-regression rows ship
// without a target value because the dataset path is installation-specific.
//
// Grid presets `table3:<family>[:<scheme>]` carry the hyper-parameter search
// grids per target family: gmm (mixtures and Bayesian logistic regression),
// phi4, and other (8gauss / rings / funnel).

struct grid_spec {
  std::vector<double> t0s;
  std::vector<double> etas;
  std::size_t n_runs = 0;  // 0: max(64, config runs / 8)
};

struct grid_preset_def {
  grid_spec grid;
  kv_map values;  // schedule contributed at preset precedence
};

namespace detail {

struct table4_row {
  const char* key;
  const char* target;     // empty: caller must supply --target
  const char* mcmc;       // inner chain length
  double eta_std, t0_std;
  double eta_g11, t0_g11;
  double eta_g21, t0_g21;
};

inline const std::vector<table4_row>& table4_rows() {
  static const std::vector<table4_row> rows = {
      {"8gauss", "8gauss", "32", 5.7, 0.60, 5.7, 0.35, 5.0, 0.35},
      {"rings", "rings", "32", 4.6, 1.20, 4.6, 0.10, 4.6, 0.30},
      {"funnel", "funnel", "32", 5.0, 1.00, 4.6, 0.30, 4.6, 0.40},
      {"gmm8", "gmm:8", "32", 5.0, 0.40, 5.0, 0.25, 5.0, 0.45},
      {"gmm16", "gmm:16", "32", 5.0, 0.20, 5.0, 0.15, 5.0, 0.35},
      {"gmm32", "gmm:32", "48", 5.0, 0.10, 5.0, 0.10, 5.0, 0.25},
      {"gmm64", "gmm:64", "64", 5.0, 0.05, 5.0, 0.05, 5.0, 0.20},
      {"ionosphere", "", "32", 5.0, 0.03, 5.0, 0.03, 5.0, 0.15},
      {"sonar", "", "32", 5.0, 0.03, 5.0, 0.03, 5.0, 0.15},
      {"phi4", "phi4:0", "64", 5.7, 0.80, 5.7, 0.30, 5.7, 0.40},
      {"phi4-0.025", "phi4:0.025", "64", 5.7, 1.80, 5.7, 0.35, 6.1, 0.45},
      {"phi4-0.05", "phi4:0.05", "64", 6.1, 1.00, 5.7, 0.30, 5.7, 0.40},
      {"phi4-0.075", "phi4:0.075", "64", 5.7, 1.80, 5.7, 0.35, 5.7, 0.40},
      {"phi4-0.1", "phi4:0.1", "64", 5.7, 1.40, 5.7, 0.45, 5.7, 0.40},
  };
  return rows;
}

inline std::string scheme_schedule(const std::string& scheme,
                                   const std::string& preset) {
  if (scheme == "standard") return "standard";
  if (scheme == "geom11") return "geom:1,1";
  if (scheme == "geom21") return "geom:2,1";
  throw std::invalid_argument("config: unknown preset '" + preset +
                              "' (scheme must be standard|geom11|geom21)");
}

}  // namespace detail

inline bool is_grid_preset(const std::string& name) {
  return name.rfind("table3:", 0) == 0;
}

/// Values contributed by an experiment preset `table4:<target>:<scheme>`.
inline kv_map preset_values(const std::string& name) {
  if (is_grid_preset(name))
    throw std::invalid_argument("config: preset '" + name +
                                "' is a grid preset; use the grid subcommand");
  if (name.rfind("table4:", 0) != 0)
    throw std::invalid_argument("config: unknown preset '" + name + "'");
  const std::string rest = name.substr(7);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("config: unknown preset '" + name +
                                "' (expected table4:<target>:<scheme>)");
  const std::string key = rest.substr(0, colon);
  const std::string scheme = rest.substr(colon + 1);
  for (const auto& row : detail::table4_rows()) {
    if (key != row.key) continue;
    double eta = 0.0, t0 = 0.0;
    if (scheme == "standard") {
      eta = row.eta_std;
      t0 = row.t0_std;
    } else if (scheme == "geom11") {
      eta = row.eta_g11;
      t0 = row.t0_g11;
    } else if (scheme == "geom21") {
      eta = row.eta_g21;
      t0 = row.t0_g21;
    } else {
      throw std::invalid_argument(
          "config: unknown preset '" + name +
          "' (scheme must be standard|geom11|geom21)");
    }
    kv_map out;
    out["schedule"] = detail::scheme_schedule(scheme, name);
    out["eta"] = detail::num_rt(eta);
    out["t0"] = detail::num_rt(t0);
    out["mcmc-steps"] = row.mcmc;
    if (row.target[0] != '\0') out["target"] = row.target;
    return out;
  }
  throw std::invalid_argument("config: unknown preset '" + name + "'");
}

/// Search grids `table3:<family>[:<scheme>]`; scheme defaults to standard.
inline grid_preset_def grid_preset(const std::string& name) {
  if (!is_grid_preset(name))
    throw std::invalid_argument("config: unknown grid preset '" + name +
                                "' (expected table3:<family>[:<scheme>])");
  std::string rest = name.substr(7);
  std::string scheme = "standard";
  const auto colon = rest.find(':');
  if (colon != std::string::npos) {
    scheme = rest.substr(colon + 1);
    rest = rest.substr(0, colon);
  }
  grid_preset_def def;
  def.values["schedule"] = detail::scheme_schedule(scheme, name);
  auto set = [&def](std::vector<double> t0s, std::vector<double> etas) {
    def.grid.t0s = std::move(t0s);
    def.grid.etas = std::move(etas);
  };
  if (rest == "gmm") {
    if (scheme == "standard")
      set({0.03, 0.05, 0.1, 0.2, 0.4}, {5.0});
    else if (scheme == "geom11")
      set({0.03, 0.05, 0.1, 0.15, 0.25}, {5.0});
    else
      set({0.15, 0.20, 0.25, 0.35, 0.45}, {5.0});
    return def;
  }
  if (rest == "phi4") {
    if (scheme == "standard")
      set({0.8, 1.0, 1.2, 1.4, 1.8}, {5.7, 6.1});
    else if (scheme == "geom11")
      set({0.30, 0.35, 0.40, 0.45}, {5.7, 6.1});
    else
      set({0.40, 0.45, 0.50, 0.55}, {5.7, 6.1});
    return def;
  }
  if (rest == "other") {
    if (scheme == "standard")
      set({0.1, 0.2, 0.4, 1.0, 1.2}, {5.0, 5.7});
    else if (scheme == "geom11")
      set({0.1, 0.15, 0.20}, {4.6, 5.0});
    else
      set({0.30, 0.35, 0.45}, {4.6, 5.0});
    return def;
  }
  throw std::invalid_argument("config: unknown grid preset '" + name +
                              "' (family must be gmm|phi4|other)");
}

// --- configuration assembly --------------------------------------------------

/// Merge flag and file key=value layers over preset values and defaults
/// (precedence flags > file > preset > defaults), then convert to a typed,
/// range-checked configuration.  The `preset` key may appear in either layer;
/// the flag spelling wins.  Unknown keys and malformed values are rejected
/// with the offending key named.
inline experiment_config parse_config(const kv_map& flags,
                                      const kv_map& file = {}) {
  detail::reject_unknown(flags, "flags");
  detail::reject_unknown(file, "config file");

  std::string preset_name;
  if (auto it = file.find("preset"); it != file.end())
    preset_name = it->second;
  if (auto it = flags.find("preset"); it != flags.end())
    preset_name = it->second;

  kv_map merged;
  if (!preset_name.empty()) {
    if (is_grid_preset(preset_name)) {
      // Grid presets contribute their schedule here; the t0/eta lists are
      // consumed by the grid subcommand via grid_preset().
      merged = grid_preset(preset_name).values;
    } else {
      merged = preset_values(preset_name);
    }
  }
  for (const auto& [key, value] : file)
    if (key != "preset") merged[key] = value;
  for (const auto& [key, value] : flags)
    if (key != "preset") merged[key] = value;

  experiment_config cfg;
  for (const auto& [key, value] : merged) {
    if (key == "target") {
      cfg.target_spec = value;
    } else if (key == "algo") {
      cfg.algorithm = parse_algo(value);
    } else if (key == "schedule") {
      cfg.schedule = schedule_spec::parse(value);
    } else if (key == "t0") {
      cfg.t0 = detail::parse_num(value, key);
    } else if (key == "eta") {
      cfg.eta = detail::parse_num(value, key);
    } else if (key == "k") {
      cfg.k = detail::parse_count(value, key, 1);
    } else if (key == "mcmc-steps") {
      cfg.mcmc_steps = detail::parse_count(value, key, 1);
    } else if (key == "n-init") {
      cfg.n_init = detail::parse_count(value, key, 0);
    } else if (key == "runs") {
      cfg.n_runs = detail::parse_count(value, key, 1);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(detail::parse_count(value, key, 0));
    } else if (key == "metrics") {
      cfg.metrics = detail::split_list(value);
      for (const auto& m : cfg.metrics) (void)parse_metric(m);
    } else if (key == "out") {
      cfg.out_dir = value;
    } else if (key == "threads") {
      cfg.threads =
          static_cast<unsigned>(detail::parse_count(value, key, 0));
    }
  }
  if (cfg.target_spec.empty())
    throw std::invalid_argument("config: missing required key 'target'");
  if (!(cfg.t0 > 0.0))
    throw std::invalid_argument("config: invalid value for key 't0': '" +
                                detail::num_rt(cfg.t0) + "' (need t0 > 0)");
  if (!(cfg.eta > 0.0))
    throw std::invalid_argument("config: invalid value for key 'eta': '" +
                                detail::num_rt(cfg.eta) + "' (need eta > 0)");
  return cfg;
}

/// Flat JSON object {key: string-or-number} -> key=value layer.
inline kv_map read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: malformed JSON in '" + path +
                                "': " + e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("config: file '" + path +
                                "' must hold a JSON object");
  kv_map out;
  for (const auto& [key, value] : j.items()) {
    if (value.is_string())
      out[key] = value.get<std::string>();
    else if (value.is_number_integer())
      out[key] = std::to_string(value.get<long long>());
    else if (value.is_number())
      out[key] = detail::num_rt(value.get<double>());
    else
      throw std::invalid_argument("config: value for key '" + key +
                                  "' in '" + path +
                                  "' must be a string or number");
  }
  return out;
}

/// Canonical key=value text covering exactly the hashed fields.
inline std::string canonical_config(const experiment_config& cfg) {
  std::ostringstream os;
  os << "algo=" << algo_str(cfg.algorithm) << " eta=" << detail::num_rt(cfg.eta)
     << " k=" << cfg.k << " mcmc-steps=" << cfg.mcmc_steps
     << " n-init=" << cfg.n_init << " runs=" << cfg.n_runs
     << " schedule=" << cfg.schedule.str() << " seed=" << cfg.seed
     << " t0=" << detail::num_rt(cfg.t0) << " target=" << cfg.target_spec;
  return os.str();
}

inline std::string config_hash(const experiment_config& cfg) {
  return detail::hex64(detail::fnv1a64(canonical_config(cfg)));
}

// --- metric evaluation --------------------------------------------------------

namespace detail {

/// Exact reference draws for two-sample metrics.  Stream id 1 of the metrics
/// phase; the sliced projections use stream id 0, so the two never collide.
inline sample_set draw_reference(const target_model& target, std::size_t n,
                                 std::uint64_t seed) {
  if (!target.has_exact_sampler())
    throw std::invalid_argument(
        "config: metric needs exact reference samples, but target '" +
        target.name + "' has no exact sampler");
  rng_stream rng(seed, 1, rng_phase::metrics);
  sample_set out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = target.exact_sample(rng);
  return out;
}

inline sample_set head(const sample_set& s, std::size_t n) {
  return sample_set(s.begin(), s.begin() + std::min(n, s.size()));
}

}  // namespace detail

/// Evaluate one metric on a sample set.  Deterministic given (samples, target
/// spelling, seed); everything needed to recompute an entry is stored with it.
inline double compute_metric(const metric_spec& m, const sample_set& samples,
                             const target_model& target, std::uint64_t seed) {
  if (samples.empty())
    throw numeric_error("metrics: no samples to evaluate '" + m.name + "'");
  if (m.kind == "mode-weight") return mode_weight(samples);
  if (m.kind == "mode-weight-error") {
    if (!target.mode_weight_truth)
      throw std::invalid_argument(
          "config: metric 'mode-weight-error' needs a target with a known "
          "mode weight; '" + target.name + "' has none");
    return std::fabs(mode_weight(samples) - *target.mode_weight_truth);
  }
  if (m.kind == "predictive-ll")
    return predictive_ll(samples, load_dataset(m.path));
  const sample_set ref = detail::draw_reference(target, samples.size(), seed);
  if (m.kind == "sliced-w2") return sliced_w2(samples, ref, 128, seed);
  if (m.kind == "sliced-ks") return sliced_ks(samples, ref, 128, seed);
  // entropic-w2: the plan solver is quadratic in the point count, so large
  // batches are truncated to the solver's size cap (deterministic prefix).
  return entropic_w2(detail::head(samples, kEntropicSizeCap),
                     detail::head(ref, kEntropicSizeCap), m.eps);
}

// --- experiment orchestration ---------------------------------------------------

struct metric_entry {
  std::string metric;
  double value = 0.0;
  std::size_t n = 0;  // samples the value was computed from
  std::uint64_t seed = 0;
};

struct run_artifacts {
  std::filesystem::path dir;
  std::string hash;
  sample_set samples;
  std::vector<metric_entry> metrics;
  nlohmann::json diagnostics;
};

namespace detail {

inline isotropic_mixture mixture_for(const std::string& spec) {
  if (spec == "8gauss") return eight_gaussians_mixture();
  if (spec.rfind("gmm:", 0) == 0) {
    double d = 0.0;
    if (!parse_token(spec.substr(4), d) || d < 1.0 || d != std::floor(d))
      throw std::invalid_argument("target: bad dimension in '" + spec + "'");
    return benchmark_mixture(static_cast<std::size_t>(d));
  }
  throw std::invalid_argument(
      "config: algorithm 'ideal' needs an analytic Gaussian-mixture target "
      "(gmm:<d> or 8gauss), got '" + spec + "'");
}

/// Importance-weighted particles -> unweighted samples: systematic resampling
/// unless the weights are already uniform.
inline sample_set resample_to_unweighted(const sample_set& particles,
                                         const std::vector<double>& log_w,
                                         std::uint64_t seed) {
  double lo = kInf, hi = -kInf;
  for (double w : log_w) {
    lo = std::min(lo, w);
    hi = std::max(hi, w);
  }
  if (hi - lo <= 1e-12) return particles;
  rng_stream rng(seed, 0, rng_phase::algorithm);
  const auto idx = systematic_resample(normalized_weights(log_w), rng);
  sample_set out(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) out[i] = particles[idx[i]];
  return out;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw numeric_error("artifacts: cannot write " + path.string());
  out << body;
  if (!out) throw numeric_error("artifacts: short write to " + path.string());
}

inline std::string samples_csv_text(const experiment_config& cfg,
                                    const std::string& hash,
                                    const sample_set& samples) {
  std::ostringstream os;
  os << "# config_hash=" << hash << "\n";
  os << "# config " << canonical_config(cfg) << "\n";
  const std::size_t d = samples.empty() ? 0 : samples.front().size();
  for (std::size_t j = 0; j < d; ++j) os << (j ? "," : "") << "x" << j;
  os << "\n";
  for (const auto& row : samples) {
    for (std::size_t j = 0; j < row.size(); ++j)
      os << (j ? "," : "") << num_rt(row[j]);
    os << "\n";
  }
  return os.str();
}

}  // namespace detail

/// Samples and embedded configuration read back from a samples.csv artifact.
struct samples_csv {
  std::string hash;
  kv_map config;  // parsed from the canonical echo line
  sample_set samples;
};

inline samples_csv read_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("artifacts: cannot read '" + path + "'");
  samples_csv out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# config_hash=", 0) == 0) {
      out.hash = line.substr(14);
      continue;
    }
    if (line.rfind("# config ", 0) == 0) {
      std::istringstream fields(line.substr(9));
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq != std::string::npos)
          out.config[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    if (line[0] == '#') continue;
    if (!header_seen) {  // column-name row
      header_seen = true;
      continue;
    }
    vec row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ','))
      row.push_back(detail::parse_num(cell, "samples.csv"));
    out.samples.push_back(std::move(row));
  }
  return out;
}

/// Run the configured experiment and persist all artifacts under cfg.out_dir.
/// Rerunning the same configuration rewrites byte-identical samples.csv.
inline run_artifacts run_experiment(const experiment_config& cfg) {
  if (cfg.target_spec.empty())
    throw std::invalid_argument("config: missing required key 'target'");
  if (cfg.out_dir.empty())
    throw std::invalid_argument("config: missing required key 'out'");
  if (cfg.n_runs < 1)
    throw std::invalid_argument(
        "config: invalid value for key 'runs': need at least one run");

  const target_model target = parse_target(cfg.target_spec);
  std::vector<metric_spec> specs;
  specs.reserve(cfg.metrics.size());
  for (const auto& name : cfg.metrics) {
    metric_spec m = parse_metric(name);
    // Reference requirements are validated before any sampling starts.
    if ((m.kind == "sliced-w2" || m.kind == "sliced-ks" ||
         m.kind == "entropic-w2") &&
        !target.has_exact_sampler())
      throw std::invalid_argument("config: metric '" + m.name +
                                  "' needs exact reference samples, but "
                                  "target '" + target.name +
                                  "' has no exact sampler");
    if (m.kind == "mode-weight-error" && !target.mode_weight_truth)
      throw std::invalid_argument(
          "config: metric 'mode-weight-error' needs a target with a known "
          "mode weight; '" + target.name + "' has none");
    specs.push_back(std::move(m));
  }

  run_artifacts art;
  art.dir = std::filesystem::path(cfg.out_dir);
  art.hash = config_hash(cfg);
  std::filesystem::create_directories(art.dir);
  const auto marker = art.dir / "INCOMPLETE";
  detail::write_text_file(marker, "run started; artifacts incomplete\n");

  nlohmann::json diag;
  diag["algorithm"] = algo_str(cfg.algorithm);
  diag["config_hash"] = art.hash;

  switch (cfg.algorithm) {
    case algo_kind::slips: {
      slips_config sc;
      sc.schedule = cfg.schedule;
      sc.t0 = cfg.t0;
      sc.eta = cfg.eta;
      sc.K = cfg.k;
      sc.mcmc_steps = cfg.mcmc_steps;
      sc.n_init = cfg.n_init;
      sc.seed = cfg.seed;
      sc.threads = cfg.threads;
      batch_output out = slips_run_batch(target, sc, cfg.n_runs);
      art.samples = std::move(out.samples);
      diag["n_runs"] = out.diag.n_runs;
      diag["n_aborted"] = out.diag.n_aborted;
      diag["mean_init_accept"] = out.diag.mean_init_accept;
      diag["mean_main_accept"] = out.diag.mean_main_accept;
      diag["min_main_accept"] = out.diag.min_main_accept;
      diag["max_main_accept"] = out.diag.max_main_accept;
      diag["mean_final_step"] = out.diag.mean_final_step;
      diag["abort_reasons"] = out.diag.abort_reasons;
      nlohmann::json accept = nlohmann::json::array();
      nlohmann::json init_accept = nlohmann::json::array();
      nlohmann::json steps = nlohmann::json::array();
      for (const auto& rd : out.run_diags) {
        accept.push_back(rd.main_accept_rate);
        init_accept.push_back(rd.init_accept_rate);
        steps.push_back(rd.final_step_size);
      }
      diag["acceptance_trace"] = std::move(accept);
      diag["init_acceptance_trace"] = std::move(init_accept);
      diag["final_step_sizes"] = std::move(steps);
      break;
    }
    case algo_kind::ideal: {
      const isotropic_mixture mix = detail::mixture_for(cfg.target_spec);
      art.samples =
          run_ideal(mix, cfg.schedule, cfg.t0, cfg.eta, cfg.k, cfg.n_runs,
                    grid_mode::snr, target.a0, cfg.seed, cfg.threads);
      diag["n_runs"] = cfg.n_runs;
      break;
    }
    case algo_kind::ais: {
      ais_result res =
          ais_run(target, cfg.k, cfg.n_runs, cfg.mcmc_steps, cfg.seed,
                  cfg.threads);
      art.samples = detail::resample_to_unweighted(res.particles,
                                                   res.log_weights, cfg.seed);
      diag["ess"] = res.ess;
      diag["degenerate"] = res.degenerate;
      diag["n_particles"] = cfg.n_runs;
      diag["k_levels"] = cfg.k;
      double lw_min = kInf, lw_max = -kInf, lw_mean = 0.0;
      for (double w : res.log_weights) {
        lw_min = std::min(lw_min, w);
        lw_max = std::max(lw_max, w);
        lw_mean += w;
      }
      lw_mean /= static_cast<double>(res.log_weights.size());
      diag["log_weight_min"] = lw_min;
      diag["log_weight_max"] = lw_max;
      diag["log_weight_mean"] = lw_mean;
      break;
    }
    case algo_kind::smc: {
      smc_result res =
          smc_run(target, cfg.k, cfg.n_runs, cfg.mcmc_steps, cfg.seed,
                  cfg.threads);
      art.samples = std::move(res.particles);
      diag["resample_count"] = res.resample_count;
      diag["final_ess"] = res.final_ess;
      diag["degenerate"] = res.degenerate;
      diag["n_particles"] = cfg.n_runs;
      diag["k_levels"] = cfg.k;
      break;
    }
  }

  // All file writes below happen on this (coordinating) thread.
  detail::write_text_file(art.dir / "samples.csv",
                          detail::samples_csv_text(cfg, art.hash, art.samples));

  for (const auto& m : specs) {
    metric_entry e;
    e.metric = m.name;
    e.value = compute_metric(m, art.samples, target, cfg.seed);
    e.n = art.samples.size();
    e.seed = cfg.seed;
    art.metrics.push_back(std::move(e));
  }
  nlohmann::json mj;
  mj["config_hash"] = art.hash;
  mj["metrics"] = nlohmann::json::array();
  for (const auto& e : art.metrics)
    mj["metrics"].push_back({{"metric", e.metric},
                             {"value", e.value},
                             {"n", e.n},
                             {"seed", e.seed},
                             {"config_hash", art.hash}});
  detail::write_text_file(art.dir / "metrics.json", mj.dump(2) + "\n");

  diag["n_samples"] = art.samples.size();
  diag["complete"] = true;
  art.diagnostics = diag;
  detail::write_text_file(art.dir / "diagnostics.json", diag.dump(2) + "\n");

  std::ostringstream plot;
  plot << "series,x,y\n";
  const std::size_t d = target.dim;
  for (const auto& e : art.metrics) {
    plot << e.metric << "-vs-dimension," << d << ","
         << detail::num_rt(e.value) << "\n";
    plot << e.metric << "-vs-budget," << cfg.k << ","
         << detail::num_rt(e.value) << "\n";
  }
  detail::write_text_file(art.dir / "plotdata.csv", plot.str());

  std::filesystem::remove(marker);
  return art;
}

// --- grid search -----------------------------------------------------------------

struct grid_row {
  double t0 = 0.0;
  double eta = 0.0;
  double value = 0.0;
  std::size_t n = 0;
  std::string hash;
};

struct grid_result {
  std::string metric;
  bool higher_is_better = false;
  std::size_t n_runs = 0;  // per-cell run count actually used
  std::vector<grid_row> rows;  // ranked best-first
};

namespace detail {

/// Rank rows best-first: better metric value first (orientation given by the
/// caller), exact ties by t0 ascending, then eta ascending; non-finite values
/// always rank last.  Stable, so the result is independent of input order up
/// to the documented keys.
inline void rank_rows(std::vector<grid_row>& rows, bool higher_is_better) {
  std::stable_sort(rows.begin(), rows.end(),
                   [higher_is_better](const grid_row& a, const grid_row& b) {
                     const bool fa = std::isfinite(a.value);
                     const bool fb = std::isfinite(b.value);
                     if (fa != fb) return fa;
                     if (fa && a.value != b.value)
                       return higher_is_better ? a.value > b.value
                                               : a.value < b.value;
                     if (a.t0 != b.t0) return a.t0 < b.t0;
                     return a.eta < b.eta;
                   });
}

}  // namespace detail

/// Cartesian sweep over t0 x eta at reduced per-cell run count, ranked by the
/// first configured metric.  Each cell's artifacts land in a subdirectory of
/// cfg.out_dir; a ranked summary is written to gridresults.csv.
inline grid_result grid_search(const experiment_config& base,
                               const grid_spec& grid) {
  if (base.metrics.empty())
    throw std::invalid_argument(
        "config: grid search needs a ranking metric; set key 'metrics'");
  if (grid.t0s.empty() || grid.etas.empty())
    throw std::invalid_argument("config: grid values for t0 and eta must be "
                                "non-empty");
  if (base.out_dir.empty())
    throw std::invalid_argument("config: missing required key 'out'");

  grid_result res;
  res.metric = base.metrics.front();
  res.higher_is_better = parse_metric(res.metric).kind == "predictive-ll";
  res.n_runs = grid.n_runs > 0
                   ? grid.n_runs
                   : std::max<std::size_t>(64, base.n_runs / 8);

  for (double t0 : grid.t0s) {
    for (double eta : grid.etas) {
      experiment_config cell = base;
      cell.t0 = t0;
      cell.eta = eta;
      cell.n_runs = res.n_runs;
      cell.out_dir = (std::filesystem::path(base.out_dir) /
                      ("cell_t0-" + detail::num_rt(t0) + "_eta-" +
                       detail::num_rt(eta)))
                         .string();
      run_artifacts art = run_experiment(cell);
      grid_row row;
      row.t0 = t0;
      row.eta = eta;
      row.n = art.samples.size();
      row.hash = art.hash;
      row.value = std::numeric_limits<double>::quiet_NaN();
      for (const auto& e : art.metrics)
        if (e.metric == res.metric) row.value = e.value;
      res.rows.push_back(std::move(row));
    }
  }
  detail::rank_rows(res.rows, res.higher_is_better);

  std::ostringstream os;
  os << "rank,t0,eta,metric,value,n,config_hash\n";
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    os << (i + 1) << "," << detail::num_rt(r.t0) << ","
       << detail::num_rt(r.eta) << "," << res.metric << ","
       << detail::num_rt(r.value) << "," << r.n << "," << r.hash << "\n";
  }
  detail::write_text_file(
      std::filesystem::path(base.out_dir) / "gridresults.csv", os.str());
  return res;
}

}  // namespace slocal
