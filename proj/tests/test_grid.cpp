#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lowrank/grid.hpp"

using namespace lowrank;
using namespace lowrank::grid;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_tmp(const std::string& name, const std::string& body) {
  const auto path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path;
}

const char* kTinyGrid = R"(
# tiny smoke grid
task = synthetic
m = 10
n = 10
rank = 2
sample_size = 60
depth = [1, 2]
optimizer = adam
penalty = [ratio, none]
lambda = 0.05
lr = 0.01
max_iters = 300
snapshot_every = 50
seeds = [0, 1]
)";

}  // namespace

TEST_CASE("config parsing: scalars, arrays, comments, quotes") {
  const auto cfg = ConfigFile::parse_string(R"(
# comment line
task = synthetic
depth = [1, 3]        # trailing comment
lr = 1e-3
name = "with spaces"
penalty = [ratio, schatten_ratio:1/3:2/3]
)");
  CHECK(cfg.str("task", "") == "synthetic");
  CHECK(cfg.integers("depth") == std::vector<long>{1, 3});
  CHECK(cfg.num("lr", 0.0) == doctest::Approx(1e-3));
  CHECK(cfg.str("name", "") == "with spaces");
  CHECK(cfg.strings("penalty")[1] == "schatten_ratio:1/3:2/3");
  CHECK(cfg.integer("missing", 7) == 7);
  CHECK_THROWS_AS(cfg.list("missing"), InvalidConfigError);
}

TEST_CASE("config parse errors carry line numbers") {
  try {
    ConfigFile::parse_string("a = 1\nnot a pair\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(ConfigFile::parse_string("xs = [1, 2\n"), ParseError);
}

TEST_CASE("grid run, idempotent re-run, and parallel determinism") {
  const auto cfg_path = write_tmp("lowrank_grid_tiny.cfg", kTinyGrid);
  const auto out_dir = fs::temp_directory_path() / "lowrank_grid_out";
  fs::remove_all(out_dir);

  GridOptions options;
  options.jobs = 1;
  options.out_override = out_dir.string();
  const auto summary = run_grid(cfg_path.string(), options);
  CHECK(summary.failures == 0);
  CHECK(summary.records.size() == 2 * 2 * 2);  // depth x penalty x seed
  CHECK(fs::exists(summary.manifest_path));
  CHECK(fs::exists(out_dir / "summary.csv"));
  for (const auto& r : summary.records) {
    CHECK(fs::exists(r.snapshot_path));
    CHECK(!r.config_hash.empty());
    CHECK(r.stop_reason.substr(0, 6) != "failed");
  }
  const std::string summary_csv = slurp(out_dir / "summary.csv");

  // Re-run: cached records are reused (wall time of the second pass is ~0,
  // but the observable contract is identical output without --force).
  const auto again = run_grid(cfg_path.string(), options);
  CHECK(again.records.size() == summary.records.size());
  CHECK(slurp(out_dir / "summary.csv") == summary_csv);

  // Parallel execution produces identical summary bytes.
  const auto out_par = fs::temp_directory_path() / "lowrank_grid_out_par";
  fs::remove_all(out_par);
  GridOptions par = options;
  par.jobs = 2;
  par.out_override = out_par.string();
  run_grid(cfg_path.string(), par);
  CHECK(slurp(out_par / "summary.csv") == summary_csv);

  // Seed override shrinks the plan.
  GridOptions seeded = options;
  seeded.seeds_override = std::vector<std::uint64_t>{0};
  const auto smaller_out = fs::temp_directory_path() / "lowrank_grid_out_seed";
  fs::remove_all(smaller_out);
  seeded.out_override = smaller_out.string();
  const auto small = run_grid(cfg_path.string(), seeded);
  CHECK(small.records.size() == 4);

  // Plot data from the manifest.
  const auto plot_path = fs::temp_directory_path() / "lowrank_plotdata.csv";
  emit_plot_data(summary.manifest_path, "fig1", plot_path.string());
  const std::string plot = slurp(plot_path);
  CHECK(plot.find("series,x,metric,value") == 0);
  CHECK(plot.find("effective_rank") != std::string::npos);

  emit_plot_data(summary.manifest_path, "fig4", plot_path.string());
  const std::string sweep = slurp(plot_path);
  CHECK(sweep.find("test_error") != std::string::npos);

  fs::remove_all(out_dir);
  fs::remove_all(out_par);
  fs::remove_all(smaller_out);
  fs::remove(cfg_path);
  fs::remove(plot_path);
}

TEST_CASE("report_table renders Err/Rk cells with rounding") {
  // Synthesize a manifest directly.
  const auto out_dir = fs::temp_directory_path() / "lowrank_report_test";
  fs::create_directories(out_dir);
  const auto manifest = out_dir / "manifest.json";
  {
    std::ofstream out(manifest);
    out << R"({
      "task": "synthetic",
      "config": {},
      "runs": [
        {"cell_key": "adam_d1_ratio", "config_hash": "x", "depth": 1,
         "optimizer": "adam", "penalty": "ratio", "lambda": 0.05,
         "sample_size": 2000, "seed": 0, "final_train_loss": 1e-8,
         "final_test_error": 4.2e-7, "final_effective_rank": 5.04,
         "rounded_rank": 5, "stop_reason": "loss_floor", "final_iter": 9000,
         "wall_seconds": 1.0, "snapshot_path": ""},
        {"cell_key": "adam_d1_none", "config_hash": "y", "depth": 1,
         "optimizer": "adam", "penalty": "none", "lambda": 0.0,
         "sample_size": 2000, "seed": 0, "final_train_loss": 1e-8,
         "final_test_error": 1.0041, "final_effective_rank": 5.5,
         "rounded_rank": 6, "stop_reason": "loss_floor", "final_iter": 9000,
         "wall_seconds": 1.0, "snapshot_path": ""}
      ]
    })";
  }
  const std::string table = report_table(manifest.string(), "table1");
  CHECK(table.find("4e-7 / 5") != std::string::npos);
  CHECK(table.find("1.00 / 6") != std::string::npos);  // 5.5 rounds to 6

  // Empty manifest renders dashes only.
  const auto empty = out_dir / "empty.json";
  {
    std::ofstream out(empty);
    out << R"({"task": "synthetic", "config": {}, "runs": []})";
  }
  const std::string blank = report_table(empty.string(), "table1");
  CHECK(blank.find("optimizer") != std::string::npos);
  fs::remove_all(out_dir);
}

TEST_CASE("validate_dynamics emits a json report") {
  const auto cfg_path = write_tmp("lowrank_dyn.cfg", R"(
task = oracle-validation
size = 4
depth = 2
instances = 2
alpha = [1e-5, 5e-6]
regime = [gd, adam]
lambda = 0.1
seed = 0
)");
  const auto json_path = fs::temp_directory_path() / "lowrank_dyn_report.json";
  const std::string text = validate_dynamics(cfg_path.string(), json_path.string());
  CHECK(text.find("\"regime\": \"gd\"") != std::string::npos);
  CHECK(text.find("max_w_deviation") != std::string::npos);
  CHECK(fs::exists(json_path));
  fs::remove(cfg_path);
  fs::remove(json_path);
}

TEST_CASE("config hash is stable and collision-averse on near misses") {
  const auto h1 = config_hash("a|b|c");
  CHECK(h1 == config_hash("a|b|c"));
  CHECK(h1 != config_hash("a|b|d"));
  CHECK(h1.size() == 16);
}
