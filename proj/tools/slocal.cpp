// slocal -- stochastic-localization sampling toolkit.
//
// Subcommands:
//   run        sample a target with slips|ideal|ais|smc and persist artifacts
//   grid       Cartesian t0 x eta hyper-parameter search, ranked by a metric
//   concavity  print the log-concavity window (t_q, t_p) and a suggested t0
//
// Exit codes: 0 success, 2 validation error (bad flags, keys, or values),
// 3 runtime numeric failure.

#include <cstdio>
#include <exception>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slocal/cli_harness.hpp"

namespace {

// Options arrive as optional strings so that only flags the user actually
// passed enter the precedence merge.
struct flag_bag {
  std::map<std::string, std::optional<std::string>> values;

  void add(CLI::App* cmd, const std::string& key, const std::string& help) {
    values[key] = std::nullopt;
    cmd->add_option("--" + key, values[key], help);
  }

  slocal::kv_map collect() const {
    slocal::kv_map out;
    for (const auto& [key, value] : values)
      if (value) out[key] = *value;
    return out;
  }
};

void add_run_flags(CLI::App* cmd, flag_bag& bag) {
  bag.add(cmd, "target",
          "target spec: gmm:<d>, 8gauss, rings, funnel, phi4:<h>, "
          "logreg:<csv>");
  bag.add(cmd, "algo", "algorithm: slips|ideal|ais|smc (default slips)");
  bag.add(cmd, "schedule",
          "schedule: standard, geom-inf:<a1>, or geom:<a1>,<a2>");
  bag.add(cmd, "t0", "starting time (> 0)");
  bag.add(cmd, "eta", "terminal log-SNR level");
  bag.add(cmd, "k", "SDE steps / annealing levels");
  bag.add(cmd, "mcmc-steps", "MALA steps per posterior / per level");
  bag.add(cmd, "n-init", "warmup updates before the SDE sweep");
  bag.add(cmd, "runs", "independent runs (particles for ais/smc)");
  bag.add(cmd, "seed", "master RNG seed");
  bag.add(cmd, "metrics",
          "comma list: sliced-w2, sliced-ks, entropic-w2[:eps], mode-weight, "
          "mode-weight-error, predictive-ll:<csv>");
  bag.add(cmd, "out", "output directory for artifacts");
  bag.add(cmd, "threads", "worker cap (0 = hardware, capped by SLOCAL_THREADS)");
  bag.add(cmd, "preset", "named preset, e.g. table4:gmm8:standard");
}

std::vector<double> parse_grid_list(const std::string& text,
                                    const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : slocal::detail::split_list(text))
    out.push_back(slocal::detail::parse_num(tok, key));
  if (out.empty())
    throw std::invalid_argument("config: invalid value for key '" + key +
                                "': empty list");
  return out;
}

void print_metrics(const slocal::run_artifacts& art) {
  for (const auto& e : art.metrics)
    std::printf("metric %s = %.10g  (n=%zu)\n", e.metric.c_str(), e.value,
                e.n);
}

int run_command(const flag_bag& bag, const std::optional<std::string>& file) {
  slocal::kv_map file_kv;
  if (file) file_kv = slocal::read_config_file(*file);
  const slocal::experiment_config cfg =
      slocal::parse_config(bag.collect(), file_kv);
  const slocal::run_artifacts art = slocal::run_experiment(cfg);
  std::printf("wrote %s (config %s, %zu samples)\n", art.dir.string().c_str(),
              art.hash.c_str(), art.samples.size());
  print_metrics(art);
  return 0;
}

int grid_command(const flag_bag& bag, const std::optional<std::string>& file,
                 const std::optional<std::string>& grid_t0,
                 const std::optional<std::string>& grid_eta,
                 const std::optional<std::string>& grid_runs) {
  slocal::kv_map file_kv;
  if (file) file_kv = slocal::read_config_file(*file);
  const slocal::kv_map flags = bag.collect();
  const slocal::experiment_config cfg = slocal::parse_config(flags, file_kv);

  // Grid values: explicit flags win; else a table3 preset; else the single
  // configured point.
  slocal::grid_spec grid;
  std::string preset_name;
  if (auto it = file_kv.find("preset"); it != file_kv.end())
    preset_name = it->second;
  if (auto it = flags.find("preset"); it != flags.end())
    preset_name = it->second;
  if (!preset_name.empty() && slocal::is_grid_preset(preset_name))
    grid = slocal::grid_preset(preset_name).grid;
  if (grid_t0) grid.t0s = parse_grid_list(*grid_t0, "grid-t0");
  if (grid_eta) grid.etas = parse_grid_list(*grid_eta, "grid-eta");
  if (grid.t0s.empty()) grid.t0s = {cfg.t0};
  if (grid.etas.empty()) grid.etas = {cfg.eta};
  if (grid_runs)
    grid.n_runs = slocal::detail::parse_count(*grid_runs, "grid-runs", 1);

  const slocal::grid_result res = slocal::grid_search(cfg, grid);
  std::printf("grid ranked by %s (%s is better), %zu runs per cell\n",
              res.metric.c_str(), res.higher_is_better ? "higher" : "lower",
              res.n_runs);
  std::printf("%4s  %10s  %10s  %14s\n", "rank", "t0", "eta", "value");
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    std::printf("%4zu  %10g  %10g  %14.8g\n", i + 1, r.t0, r.eta, r.value);
  }
  return 0;
}

int concavity_command(const std::string& target_spec,
                      const std::string& schedule_text) {
  const slocal::target_model target = slocal::parse_target(target_spec);
  const slocal::schedule_spec sched =
      slocal::schedule_spec::parse(schedule_text);
  slocal::a0_params p;
  p.d = target.dim;
  p.R = target.a0.R;
  p.tau = target.a0.tau;
  p.sigma = slocal::sigma_from_a0(target.a0.R, target.a0.tau);
  std::printf("target %s: d=%zu R=%g tau=%g sigma=%g\n", target_spec.c_str(),
              p.d, p.R, p.tau, p.sigma);
  std::printf("schedule %s\n", sched.str().c_str());
  const slocal::concavity_window w = slocal::t_p_t_q(p, sched);
  std::printf("t_q=%.10g t_p=%.10g\n", w.t_q, w.t_p);
  if (slocal::duality_holds(p)) {
    std::printf("duality holds (d R^2 < 2 tau^2): window (t_q, t_p) is "
                "log-concave on both sides\n");
    std::printf("suggested t0 = %.10g (midpoint of the window)\n",
                0.5 * (w.t_q + w.t_p));
  } else {
    std::printf("no guaranteed window (d R^2 >= 2 tau^2); pick t0 by grid "
                "search\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slocal: stochastic-localization sampling toolkit"};
  app.require_subcommand(1);

  flag_bag run_bag;
  std::optional<std::string> run_file;
  CLI::App* run = app.add_subcommand("run", "sample a target and write artifacts");
  add_run_flags(run, run_bag);
  run->add_option("--config", run_file, "JSON config file (flat object)");

  flag_bag grid_bag;
  std::optional<std::string> grid_file, grid_t0, grid_eta, grid_runs;
  CLI::App* grid = app.add_subcommand("grid", "hyper-parameter grid search");
  add_run_flags(grid, grid_bag);
  grid->add_option("--config", grid_file, "JSON config file (flat object)");
  grid->add_option("--grid-t0", grid_t0, "comma list of t0 values");
  grid->add_option("--grid-eta", grid_eta, "comma list of eta values");
  grid->add_option("--grid-runs", grid_runs, "runs per grid cell");

  std::string conc_target, conc_schedule = "standard";
  CLI::App* conc =
      app.add_subcommand("concavity", "log-concavity window and t0 aid");
  conc->add_option("--target", conc_target, "target spec")->required();
  conc->add_option("--schedule", conc_schedule,
                   "schedule spec (default standard)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits cleanly; bad usage is validation
  }

  try {
    if (run->parsed()) return run_command(run_bag, run_file);
    if (grid->parsed())
      return grid_command(grid_bag, grid_file, grid_t0, grid_eta, grid_runs);
    return concavity_command(conc_target, conc_schedule);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "slocal: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "slocal: %s\n", e.what());
    return 3;
  }
}
