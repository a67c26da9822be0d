// Command-line harness: runs experiment grids from config files and turns
// the resulting manifests into tables and plot-ready CSV.
//
// Exit codes: 0 success, 1 configuration error, 2 partial run failures.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lowrank/grid.hpp"

namespace {

int run_command(const std::string& config, int jobs, bool force,
                const std::vector<std::uint64_t>& seeds, const std::string& out,
                const char* forced_task) {
  lowrank::grid::GridOptions options;
  options.jobs = jobs;
  options.force = force;
  if (!seeds.empty()) options.seeds_override = seeds;
  if (!out.empty()) options.out_override = out;
  if (forced_task != nullptr) {
    const auto cfg = lowrank::grid::ConfigFile::parse_file(config);
    const std::string task = cfg.str("task", forced_task);
    if (task != forced_task) {
      std::cerr << "config task is '" << task << "', expected '" << forced_task << "'\n";
      return 1;
    }
  }
  const auto summary = lowrank::grid::run_grid(config, options);
  std::cout << "runs: " << summary.records.size() << ", failures: " << summary.failures
            << "\nmanifest: " << summary.manifest_path << "\nsummary: " << summary.out_dir
            << "/summary.csv\n";
  return summary.failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lowrank: matrix completion experiments with spectral penalties"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, preset = "table1", figure = "fig1", out_path;
  std::vector<std::uint64_t> seeds;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  bool force = false;

  auto* run = app.add_subcommand("run", "execute an experiment grid from a config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--seeds", seeds, "override the seed axis");
  run->add_option("--jobs", jobs, "parallel runs");
  run->add_flag("--force", force, "re-run cells already present in the manifest");
  run->add_option("--out", out_path, "output directory override");

  auto* baselines = app.add_subcommand("baselines", "run the comparison solvers grid");
  baselines->add_option("config", config_path, "config file")->required();
  baselines->add_option("--seeds", seeds, "override the seed axis");
  baselines->add_option("--jobs", jobs, "parallel runs");
  baselines->add_flag("--force", force, "re-run cells already present in the manifest");
  baselines->add_option("--out", out_path, "output directory override");

  auto* report = app.add_subcommand("report", "render Err/Rk tables from a manifest");
  report->add_option("manifest", manifest_path, "manifest.json from a grid run")->required();
  report->add_option("--preset", preset, "table preset name");
  report->add_option("--out", out_path, "also write the table as CSV here");

  auto* plotdata = app.add_subcommand("plotdata", "emit long-format plot CSV from a manifest");
  plotdata->add_option("manifest", manifest_path, "manifest.json from a grid run")->required();
  plotdata->add_option("--figure", figure, "figure preset (fig1..fig4, rank10)");
  plotdata->add_option("--out", out_path, "output CSV path")->required();

  auto* validate = app.add_subcommand("validate-dynamics",
                                      "compare discrete steps against the flow predictions");
  validate->add_option("config", config_path, "config file")->required();
  validate->add_option("--out", out_path, "JSON report path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(config_path, jobs, force, seeds, out_path, nullptr);
    if (baselines->parsed())
      return run_command(config_path, jobs, force, seeds, out_path, "baseline");
    if (report->parsed()) {
      std::cout << lowrank::grid::report_table(manifest_path, preset, out_path);
      return 0;
    }
    if (plotdata->parsed()) {
      lowrank::grid::emit_plot_data(manifest_path, figure, out_path);
      std::cout << "wrote " << out_path << "\n";
      return 0;
    }
    if (validate->parsed()) {
      const std::string text = lowrank::grid::validate_dynamics(config_path, out_path);
      std::cout << text << "\n";
      return 0;
    }
  } catch (const lowrank::InvalidConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const lowrank::ParseError& e) {
    std::cerr << "config error (line " << e.line() << "): " << e.what() << "\n";
    return 1;
  } catch (const lowrank::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
