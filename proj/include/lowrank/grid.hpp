#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/baselines.hpp"
#include "lowrank/completion.hpp"
#include "lowrank/data.hpp"
#include "lowrank/dynamics.hpp"

namespace lowrank::grid {

/// Flat `key = value` configuration file with `[a, b, c]` arrays and `#`
/// comments. Unknown keys are rejected at expansion time by each task.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::vector<std::string>& list(const std::string& key) const;

  std::string str(const std::string& key, const std::string& fallback) const;
  std::string require_str(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  long integer(const std::string& key, long fallback) const;
  std::vector<double> nums(const std::string& key) const;
  std::vector<long> integers(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  const std::map<std::string, std::vector<std::string>>& raw() const { return values_; }

 private:
  std::map<std::string, std::vector<std::string>> values_;
};

/// One completed (or failed) run of a grid cell at one seed.
struct RunRecord {
  std::string cell_key;
  std::string config_hash;
  int depth = 1;
  std::string optimizer;
  std::string penalty;
  double lambda = 0.0;
  long sample_size = 0;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double final_test_error = 0.0;
  double final_effective_rank = 0.0;
  long rounded_rank = 0;
  std::string stop_reason;
  long final_iter = 0;
  double wall_seconds = 0.0;
  std::string snapshot_path;
};

struct GridOptions {
  int jobs = 1;
  bool force = false;
  std::optional<std::vector<std::uint64_t>> seeds_override;
  std::optional<std::string> out_override;
};

struct GridSummary {
  std::string out_dir;
  std::string manifest_path;
  std::vector<RunRecord> records;
  int failures = 0;
};

/// Expands the cartesian axes of the config, executes every (cell, seed)
/// run, writes per-run snapshot CSVs, a summary CSV, and a JSON manifest.
/// Completed runs found in an existing manifest are skipped by config hash
/// unless options.force is set. Individual failures are recorded and never
/// abort the grid.
GridSummary run_grid(const std::string& config_path, const GridOptions& options);

/// Pivot table of Err / Rk cells (mean over seeds, rank rounded) in the
/// optimizer-by-depth rows and penalty columns layout; missing cells render
/// as an em dash. Returns the text table; also writes `<out>.csv` when a
/// path is given.
std::string report_table(const std::string& manifest_path, const std::string& preset,
                         const std::string& csv_out = "");

/// Long-format plot data: series,x,metric,value. Trajectory presets use the
/// iteration as x; the sample-size sweep preset uses the sample size.
void emit_plot_data(const std::string& manifest_path, const std::string& figure,
                    const std::string& csv_out);

/// Dynamics validation driver: runs the oracle comparison over an alpha
/// ladder for each regime and writes a JSON report. Returns the report text.
std::string validate_dynamics(const std::string& config_path, const std::string& json_out);

/// FNV-1a hash of a canonical config string, as fixed-width hex.
std::string config_hash(const std::string& canonical);

}  // namespace lowrank::grid
