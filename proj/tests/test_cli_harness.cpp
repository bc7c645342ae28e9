// Configuration parsing, presets, artifact persistence, and grid search.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "slocal/cli_harness.hpp"

using namespace slocal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("presets carry the tuned hyper-parameters", "[cli_harness]") {
  SECTION("gmm8 standard") {
    const experiment_config cfg =
        parse_config({{"preset", "table4:gmm8:standard"}});
    CHECK(cfg.eta == 5.0);
    CHECK(cfg.t0 == 0.40);
    CHECK(cfg.target_spec == "gmm:8");
    CHECK(cfg.schedule == schedule_spec::standard());
    CHECK(cfg.mcmc_steps == 32);
  }
  SECTION("funnel geom11") {
    const experiment_config cfg =
        parse_config({{"preset", "table4:funnel:geom11"}});
    CHECK(cfg.eta == 4.6);
    CHECK(cfg.t0 == 0.30);
    CHECK(cfg.target_spec == "funnel");
    CHECK(cfg.schedule == schedule_spec::make_geom(1.0, 1.0));
  }
  SECTION("deep mixtures lengthen the inner chain") {
    CHECK(parse_config({{"preset", "table4:gmm32:standard"}}).mcmc_steps == 48);
    CHECK(parse_config({{"preset", "table4:gmm64:geom21"}}).mcmc_steps == 64);
    CHECK(parse_config({{"preset", "table4:phi4:geom11"}}).t0 == 0.30);
    CHECK(parse_config({{"preset", "table4:phi4:geom11"}}).eta == 5.7);
    CHECK(parse_config({{"preset", "table4:phi4:geom11"}}).mcmc_steps == 64);
  }
  SECTION("logreg presets need an explicit dataset target") {
    CHECK_THROWS_AS(parse_config({{"preset", "table4:ionosphere:standard"}}),
                    std::invalid_argument);  // no target in the preset
    const experiment_config cfg = parse_config(
        {{"preset", "table4:sonar:geom21"}, {"target", "gmm:2"}});
    CHECK(cfg.t0 == 0.15);
  }
  SECTION("unknown presets are rejected by name") {
    CHECK_THROWS_WITH(parse_config({{"preset", "table4:banana:standard"}}),
                      Catch::Matchers::ContainsSubstring("banana"));
    CHECK_THROWS_WITH(parse_config({{"preset", "table4:gmm8:fast"}}),
                      Catch::Matchers::ContainsSubstring("fast"));
  }
  SECTION("grid presets contribute their schedule when parsed as config") {
    const experiment_config g =
        parse_config({{"preset", "table3:gmm:geom11"}, {"target", "gmm:2"}});
    CHECK(g.schedule == schedule_spec::make_geom(1.0, 1.0));
  }
}

TEST_CASE("precedence is flags over file over preset over defaults",
          "[cli_harness]") {
  const kv_map preset_flags = {{"preset", "table4:gmm8:standard"},
                               {"t0", "0.2"}};
  CHECK(parse_config(preset_flags).t0 == 0.2);   // flag beats preset
  CHECK(parse_config(preset_flags).eta == 5.0);  // untouched preset value

  const kv_map file = {{"t0", "0.1"}, {"eta", "4.0"}};
  const experiment_config cfg =
      parse_config({{"preset", "table4:gmm8:standard"}, {"t0", "0.2"}}, file);
  CHECK(cfg.t0 == 0.2);   // flag beats file
  CHECK(cfg.eta == 4.0);  // file beats preset
  CHECK(cfg.k == 1024);   // default survives

  // A preset named only in the file layer still applies under the file's
  // own explicit keys.
  const experiment_config from_file =
      parse_config({}, {{"preset", "table4:gmm8:standard"}, {"eta", "9.0"}});
  CHECK(from_file.eta == 9.0);
  CHECK(from_file.t0 == 0.40);
}

TEST_CASE("unknown keys and bad values are rejected by name",
          "[cli_harness]") {
  CHECK_THROWS_WITH(parse_config({{"t-zero", "0.1"}}),
                    Catch::Matchers::ContainsSubstring("t-zero"));
  CHECK_THROWS_WITH(parse_config({{"target", "gmm:2"}}, {{"stepsize", "1"}}),
                    Catch::Matchers::ContainsSubstring("stepsize"));
  CHECK_THROWS_WITH(parse_config({{"target", "gmm:2"}, {"t0", "abc"}}),
                    Catch::Matchers::ContainsSubstring("t0"));
  CHECK_THROWS_WITH(parse_config({{"target", "gmm:2"}, {"runs", "0"}}),
                    Catch::Matchers::ContainsSubstring("runs"));
  CHECK_THROWS_WITH(parse_config({{"target", "gmm:2"}, {"runs", "2.5"}}),
                    Catch::Matchers::ContainsSubstring("runs"));
  CHECK_THROWS_WITH(parse_config({{"target", "gmm:2"}, {"t0", "-1"}}),
                    Catch::Matchers::ContainsSubstring("t0"));
  CHECK_THROWS_AS(parse_config({}), std::invalid_argument);  // no target
  CHECK_THROWS_WITH(
      parse_config({{"target", "gmm:2"}, {"metrics", "sliced-w3"}}),
      Catch::Matchers::ContainsSubstring("sliced-w3"));
}

TEST_CASE("metric grammar", "[cli_harness]") {
  CHECK(parse_metric("sliced-w2").kind == "sliced-w2");
  CHECK(parse_metric("entropic-w2").eps == 0.05);
  CHECK(parse_metric("entropic-w2:0.1").eps == 0.1);
  CHECK(parse_metric("predictive-ll:data/test.csv").path == "data/test.csv");
  CHECK_THROWS_AS(parse_metric("entropic-w2:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_metric("predictive-ll:"), std::invalid_argument);
  CHECK_THROWS_AS(parse_metric("wasserstein"), std::invalid_argument);
}

TEST_CASE("config hash covers sampling fields only", "[cli_harness]") {
  experiment_config a = parse_config({{"preset", "table4:gmm8:standard"}});
  experiment_config b = a;
  CHECK(config_hash(a) == config_hash(b));
  b.metrics = {"mode-weight"};
  b.out_dir = "/somewhere/else";
  b.threads = 7;
  CHECK(config_hash(a) == config_hash(b));  // non-sampling fields ignored
  b.seed = 99;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.t0 = 0.41;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("run_experiment writes reproducible artifacts", "[cli_harness]") {
  experiment_config cfg;
  cfg.target_spec = "gmm:2";
  cfg.algorithm = algo_kind::slips;
  cfg.t0 = 0.4;
  cfg.eta = 5.0;
  cfg.k = 16;
  cfg.mcmc_steps = 4;
  cfg.n_init = 5;
  cfg.n_runs = 32;
  cfg.seed = 3;
  cfg.metrics = {"mode-weight", "sliced-w2"};
  const fs::path dir1 = fresh_dir("slocal_cli_run1");
  const fs::path dir2 = fresh_dir("slocal_cli_run2");
  cfg.out_dir = dir1.string();
  const run_artifacts art1 = run_experiment(cfg);
  cfg.out_dir = dir2.string();
  const run_artifacts art2 = run_experiment(cfg);

  CHECK(fs::exists(dir1 / "samples.csv"));
  CHECK(fs::exists(dir1 / "metrics.json"));
  CHECK(fs::exists(dir1 / "diagnostics.json"));
  CHECK(fs::exists(dir1 / "plotdata.csv"));
  CHECK_FALSE(fs::exists(dir1 / "INCOMPLETE"));

  // Same seed, same configuration: byte-identical sample artifact.
  CHECK(slurp(dir1 / "samples.csv") == slurp(dir2 / "samples.csv"));
  CHECK(art1.hash == art2.hash);

  REQUIRE(art1.samples.size() == 32);
  CHECK(art1.samples.front().size() == 2);
  REQUIRE(art1.metrics.size() == 2);
  CHECK(art1.metrics[0].metric == "mode-weight");
  CHECK(art1.metrics[0].n == 32);

  // metrics.json carries {metric, value, n, seed, config_hash} per entry.
  const nlohmann::json mj =
      nlohmann::json::parse(slurp(dir1 / "metrics.json"));
  CHECK(mj.at("config_hash").get<std::string>() == art1.hash);
  REQUIRE(mj.at("metrics").size() == 2);
  for (const auto& e : mj.at("metrics")) {
    CHECK(e.contains("metric"));
    CHECK(e.contains("value"));
    CHECK(e.at("n").get<std::size_t>() == 32);
    CHECK(e.at("seed").get<std::uint64_t>() == 3);
    CHECK(e.at("config_hash").get<std::string>() == art1.hash);
  }

  // Diagnostics expose acceptance traces and step sizes, one entry per run.
  const nlohmann::json dj =
      nlohmann::json::parse(slurp(dir1 / "diagnostics.json"));
  CHECK(dj.at("algorithm") == "slips");
  CHECK(dj.at("complete") == true);
  CHECK(dj.at("acceptance_trace").size() == 32);
  CHECK(dj.at("final_step_sizes").size() == 32);

  // plotdata.csv holds one dimension row and one budget row per metric.
  const std::string plot = slurp(dir1 / "plotdata.csv");
  CHECK(plot.find("series,x,y\n") == 0);
  CHECK(plot.find("mode-weight-vs-dimension,2,") != std::string::npos);
  CHECK(plot.find("sliced-w2-vs-budget,16,") != std::string::npos);
}

TEST_CASE("metrics are reproducible from samples.csv alone", "[cli_harness]") {
  experiment_config cfg;
  cfg.target_spec = "gmm:2";
  cfg.t0 = 0.4;
  cfg.k = 16;
  cfg.mcmc_steps = 4;
  cfg.n_runs = 24;
  cfg.seed = 11;
  cfg.metrics = {"sliced-w2", "mode-weight-error"};
  const fs::path dir = fresh_dir("slocal_cli_repro");
  cfg.out_dir = dir.string();
  const run_artifacts art = run_experiment(cfg);

  const samples_csv read = read_samples_csv((dir / "samples.csv").string());
  CHECK(read.hash == art.hash);
  REQUIRE(read.samples.size() == art.samples.size());
  for (std::size_t i = 0; i < read.samples.size(); ++i)
    for (std::size_t j = 0; j < read.samples[i].size(); ++j)
      CHECK(read.samples[i][j] == art.samples[i][j]);  // exact round trip

  // The embedded config echo reconstructs the experiment: same hash, and the
  // stored metric values recompute bitwise from the file's samples.
  const experiment_config echoed = parse_config(read.config);
  CHECK(config_hash(echoed) == art.hash);
  const target_model target = parse_target(read.config.at("target"));
  for (const auto& e : art.metrics) {
    const double again =
        compute_metric(parse_metric(e.metric), read.samples, target, e.seed);
    CHECK(again == e.value);
  }
}

TEST_CASE("validation failures and the incomplete flag", "[cli_harness]") {
  experiment_config cfg;
  cfg.target_spec = "gmm:2";
  cfg.k = 8;
  cfg.mcmc_steps = 2;
  cfg.n_runs = 8;
  const fs::path dir = fresh_dir("slocal_cli_fail");
  cfg.out_dir = dir.string();

  SECTION("zero runs rejected before any artifact is written") {
    cfg.n_runs = 0;
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
    CHECK_FALSE(fs::exists(dir));
  }
  SECTION("metric preconditions checked before sampling") {
    cfg.target_spec = "phi4:0";  // no exact sampler
    cfg.metrics = {"sliced-w2"};
    CHECK_THROWS_WITH(run_experiment(cfg),
                      Catch::Matchers::ContainsSubstring("sliced-w2"));
    CHECK_FALSE(fs::exists(dir));
  }
  SECTION("a runtime failure after sampling leaves the incomplete marker") {
    cfg.metrics = {"predictive-ll:/nonexistent/dataset.csv"};
    CHECK_THROWS(run_experiment(cfg));
    CHECK(fs::exists(dir / "INCOMPLETE"));
    CHECK(fs::exists(dir / "samples.csv"));
  }
}

TEST_CASE("logistic-regression target with predictive log-likelihood",
          "[cli_harness]") {
  // End-to-end happy path for the dataset-backed metric: train on a small
  // 2-feature table and score the held-out copy of the same file.
  const fs::path dir = fresh_dir("slocal_cli_logreg");
  fs::create_directories(dir);
  const fs::path data = dir / "toy.csv";
  {
    std::ofstream out(data, std::ios::binary);
    rng_stream rng(21, 0, rng_phase::metrics);
    for (int i = 0; i < 24; ++i) {
      const double x0 = rng.normal();
      const double x1 = rng.normal();
      const int label = (1.5 * x0 - x1 + 0.3 * rng.normal()) > 0.0 ? 1 : 0;
      out << x0 << "," << x1 << "," << label << "\n";
    }
  }

  experiment_config cfg;
  cfg.target_spec = "logreg:" + data.string();
  cfg.t0 = 0.1;
  cfg.k = 16;
  cfg.mcmc_steps = 4;
  cfg.n_init = 5;
  cfg.n_runs = 16;
  cfg.seed = 21;
  cfg.metrics = {"predictive-ll:" + data.string()};
  cfg.out_dir = (dir / "out").string();

  const run_artifacts art = run_experiment(cfg);
  REQUIRE(art.samples.size() == 16);
  CHECK(art.samples.front().size() == 3);  // intercept + two weights
  REQUIRE(art.metrics.size() == 1);
  CHECK(art.metrics[0].metric == cfg.metrics[0]);
  CHECK(std::isfinite(art.metrics[0].value));
  // Mean log-probability of binary labels can never exceed zero, and a
  // posterior fit to the generating rule beats the coin-flip baseline.
  CHECK(art.metrics[0].value < 0.0);
  CHECK(art.metrics[0].value > std::log(0.5) - 0.35);
  CHECK_FALSE(fs::exists(dir / "out" / "INCOMPLETE"));
}

TEST_CASE("harness drives every algorithm", "[cli_harness]") {
  experiment_config cfg;
  cfg.target_spec = "gmm:1";
  cfg.k = 8;
  cfg.mcmc_steps = 2;
  cfg.n_runs = 64;
  cfg.seed = 5;
  SECTION("ideal integrator") {
    cfg.algorithm = algo_kind::ideal;
    cfg.target_spec = "gmm:2";
    cfg.k = 32;
    const fs::path dir = fresh_dir("slocal_cli_ideal");
    cfg.out_dir = dir.string();
    const run_artifacts art = run_experiment(cfg);
    REQUIRE(art.samples.size() == 64);
    CHECK(art.samples.front().size() == 2);
    for (const auto& s : art.samples) CHECK(all_finite(s));
  }
  SECTION("ideal integrator rejects non-mixture targets") {
    cfg.algorithm = algo_kind::ideal;
    cfg.target_spec = "funnel";
    cfg.out_dir = fresh_dir("slocal_cli_ideal_bad").string();
    CHECK_THROWS_WITH(run_experiment(cfg),
                      Catch::Matchers::ContainsSubstring("ideal"));
  }
  SECTION("annealed importance sampling emits unweighted samples") {
    cfg.algorithm = algo_kind::ais;
    const fs::path dir = fresh_dir("slocal_cli_ais");
    cfg.out_dir = dir.string();
    const run_artifacts art = run_experiment(cfg);
    REQUIRE(art.samples.size() == 64);
    const nlohmann::json dj =
        nlohmann::json::parse(slurp(dir / "diagnostics.json"));
    CHECK(dj.at("ess").get<double>() > 1.0);
    CHECK(dj.at("algorithm") == "ais");
  }
  SECTION("sequential Monte Carlo") {
    cfg.algorithm = algo_kind::smc;
    const fs::path dir = fresh_dir("slocal_cli_smc");
    cfg.out_dir = dir.string();
    const run_artifacts art = run_experiment(cfg);
    REQUIRE(art.samples.size() == 64);
    const nlohmann::json dj =
        nlohmann::json::parse(slurp(dir / "diagnostics.json"));
    CHECK(dj.at("final_ess").get<double>() > 0.0);
  }
}

TEST_CASE("grid presets ship the search grids", "[cli_harness]") {
  const grid_preset_def gmm = grid_preset("table3:gmm");
  CHECK(gmm.grid.t0s == std::vector<double>{0.03, 0.05, 0.1, 0.2, 0.4});
  CHECK(gmm.grid.etas == std::vector<double>{5.0});
  CHECK(gmm.values.at("schedule") == "standard");

  const grid_preset_def phi4 = grid_preset("table3:phi4:geom21");
  CHECK(phi4.grid.t0s == std::vector<double>{0.40, 0.45, 0.50, 0.55});
  CHECK(phi4.grid.etas == std::vector<double>{5.7, 6.1});
  CHECK(phi4.values.at("schedule") == "geom:2,1");

  const grid_preset_def other = grid_preset("table3:other:geom11");
  CHECK(other.grid.t0s == std::vector<double>{0.1, 0.15, 0.20});
  CHECK(other.grid.etas == std::vector<double>{4.6, 5.0});

  CHECK_THROWS_WITH(grid_preset("table3:lattice"),
                    Catch::Matchers::ContainsSubstring("lattice"));
  CHECK_THROWS_AS(grid_preset("table4:gmm8:standard"), std::invalid_argument);
}

TEST_CASE("grid of one point reduces to run_experiment", "[cli_harness]") {
  experiment_config cfg;
  cfg.target_spec = "gmm:2";
  cfg.t0 = 0.4;
  cfg.k = 16;
  cfg.mcmc_steps = 4;
  cfg.n_runs = 24;
  cfg.seed = 9;
  cfg.metrics = {"mode-weight-error"};
  const fs::path direct_dir = fresh_dir("slocal_cli_direct");
  const fs::path grid_dir = fresh_dir("slocal_cli_grid1");

  cfg.out_dir = direct_dir.string();
  const run_artifacts direct = run_experiment(cfg);

  cfg.out_dir = grid_dir.string();
  grid_spec grid;
  grid.t0s = {0.4};
  grid.etas = {5.0};
  grid.n_runs = cfg.n_runs;  // same budget: the single cell is the same run
  const grid_result res = grid_search(cfg, grid);

  REQUIRE(res.rows.size() == 1);
  CHECK(res.rows[0].value == direct.metrics[0].value);
  CHECK(res.rows[0].hash == direct.hash);
  const fs::path cell = grid_dir / "cell_t0-0.4_eta-5";
  CHECK(slurp(cell / "samples.csv") == slurp(direct_dir / "samples.csv"));
  CHECK(fs::exists(grid_dir / "gridresults.csv"));
}

TEST_CASE("grid ranking breaks ties by t0 then eta", "[cli_harness]") {
  std::vector<grid_row> rows;
  auto mk = [](double t0, double eta, double v) {
    grid_row r;
    r.t0 = t0;
    r.eta = eta;
    r.value = v;
    return r;
  };
  rows = {mk(0.4, 5.0, 0.2), mk(0.1, 5.0, 0.2), mk(0.2, 4.6, 0.1),
          mk(0.2, 5.7, 0.1),
          mk(0.3, 5.0, std::numeric_limits<double>::quiet_NaN())};
  detail::rank_rows(rows, false);
  CHECK(rows[0].t0 == 0.2);  // value 0.1, eta 4.6 before eta 5.7
  CHECK(rows[0].eta == 4.6);
  CHECK(rows[1].eta == 5.7);
  CHECK(rows[2].t0 == 0.1);  // tied 0.2-values by t0 ascending
  CHECK(rows[3].t0 == 0.4);
  CHECK(std::isnan(rows[4].value));  // non-finite ranks last

  // Metric-preserving permutation of the input leaves the ranking unchanged.
  std::vector<grid_row> shuffled = {rows[3], rows[1], rows[4], rows[0],
                                    rows[2]};
  detail::rank_rows(shuffled, false);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(shuffled[i].t0 == rows[i].t0);
    CHECK(shuffled[i].eta == rows[i].eta);
  }

  // Higher-is-better orientation flips the value order, not the tie rule.
  detail::rank_rows(rows, true);
  CHECK(rows[0].value == 0.2);
  CHECK(rows[0].t0 == 0.1);
}

TEST_CASE("grid search ranks a two-point sweep", "[cli_harness]") {
  experiment_config cfg;
  cfg.target_spec = "gmm:2";
  cfg.k = 16;
  cfg.mcmc_steps = 4;
  cfg.n_runs = 128;
  cfg.seed = 2;
  cfg.metrics = {"mode-weight-error"};
  const fs::path dir = fresh_dir("slocal_cli_grid2");
  cfg.out_dir = dir.string();
  grid_spec grid;
  grid.t0s = {0.05, 0.4};
  grid.etas = {5.0};
  grid.n_runs = 64;
  const grid_result res = grid_search(cfg, grid);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.n_runs == 64);
  CHECK(res.rows[0].n == 64);
  CHECK(res.rows[0].value <= res.rows[1].value);
  const std::string table = slurp(dir / "gridresults.csv");
  CHECK(table.find("rank,t0,eta,metric,value,n,config_hash\n") == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);

  CHECK_THROWS_AS(grid_search(experiment_config{}, grid),
                  std::invalid_argument);  // no ranking metric
}
