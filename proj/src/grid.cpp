#include "lowrank/grid.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <thread>

#include "lowrank/rng.hpp"

#include <json.hpp>

#include "lowrank/movielens.hpp"
#include "lowrank/spectral.hpp"

namespace lowrank::grid {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config file

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& body) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(body);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string strip_quotes(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  std::stringstream ss(text);
  std::string line;
  long lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ParseError("config " + origin + ": expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError("config " + origin + ": empty key or value", lineno);
    std::vector<std::string> items;
    if (value.front() == '[') {
      if (value.back() != ']')
        throw ParseError("config " + origin + ": unterminated array", lineno);
      items = split_list(value.substr(1, value.size() - 2));
    } else {
      items.push_back(value);
    }
    for (auto& s : items) s = strip_quotes(s);
    cfg.values_[key] = std::move(items);
  }
  return cfg;
}

const std::vector<std::string>& ConfigFile::list(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidConfigError("config: missing key '" + key + "'");
  return it->second;
}

std::string ConfigFile::str(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.front();
}

std::string ConfigFile::require_str(const std::string& key) const { return list(key).front(); }

double ConfigFile::num(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second.front());
  } catch (const std::exception&) {
    throw InvalidConfigError("config: key '" + key + "' is not a number");
  }
}

long ConfigFile::integer(const std::string& key, long fallback) const {
  const double v = num(key, static_cast<double>(fallback));
  return static_cast<long>(std::llround(v));
}

std::vector<double> ConfigFile::nums(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : list(key)) {
    try {
      out.push_back(std::stod(s));
    } catch (const std::exception&) {
      throw InvalidConfigError("config: key '" + key + "' holds a non-number '" + s + "'");
    }
  }
  return out;
}

std::vector<long> ConfigFile::integers(const std::string& key) const {
  std::vector<long> out;
  for (double v : nums(key)) out.push_back(static_cast<long>(std::llround(v)));
  return out;
}

std::vector<std::string> ConfigFile::strings(const std::string& key) const { return list(key); }

// ---------------------------------------------------------------------------
// Shared helpers

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (auto& c : s)
    if (c == '/' || c == ':' || c == ' ') c = '-';
  return s;
}

void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  const int workers = static_cast<int>(std::min<size_t>(static_cast<size_t>(jobs), n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  for (auto& th : pool) th.join();
}

json record_to_json(const RunRecord& r) {
  return json{{"cell_key", r.cell_key},
              {"config_hash", r.config_hash},
              {"depth", r.depth},
              {"optimizer", r.optimizer},
              {"penalty", r.penalty},
              {"lambda", r.lambda},
              {"sample_size", r.sample_size},
              {"seed", r.seed},
              {"final_train_loss", r.final_train_loss},
              {"final_test_error", r.final_test_error},
              {"final_effective_rank", r.final_effective_rank},
              {"rounded_rank", r.rounded_rank},
              {"stop_reason", r.stop_reason},
              {"final_iter", r.final_iter},
              {"wall_seconds", r.wall_seconds},
              {"snapshot_path", r.snapshot_path}};
}

RunRecord record_from_json(const json& j) {
  RunRecord r;
  r.cell_key = j.value("cell_key", "");
  r.config_hash = j.value("config_hash", "");
  r.depth = j.value("depth", 1);
  r.optimizer = j.value("optimizer", "");
  r.penalty = j.value("penalty", "");
  r.lambda = j.value("lambda", 0.0);
  r.sample_size = j.value("sample_size", 0L);
  r.seed = j.value("seed", std::uint64_t{0});
  r.final_train_loss = j.value("final_train_loss", 0.0);
  r.final_test_error = j.value("final_test_error", 0.0);
  r.final_effective_rank = j.value("final_effective_rank", 0.0);
  r.rounded_rank = j.value("rounded_rank", 0L);
  r.stop_reason = j.value("stop_reason", "");
  r.final_iter = j.value("final_iter", 0L);
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.snapshot_path = j.value("snapshot_path", "");
  return r;
}

struct PlannedRun {
  RunRecord seeded;                  // axis echo; result fields filled after the run
  std::string canonical;             // hashed for idempotency
  std::function<RunRecord()> execute;
};

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1)) /
         std::sqrt(static_cast<double>(v.size()));
}

// Err cells print as fixed two decimals in the readable range and as a
// single-significant-digit mantissa otherwise (4.2e-7 renders "4e-7").
std::string fmt_err_cell(double v) {
  if (!std::isfinite(v)) return "—";
  if (v == 0.0) return "0";
  const double a = std::abs(v);
  char buf[40];
  if (a >= 0.01 && a < 100.0) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
  }
  int e = static_cast<int>(std::floor(std::log10(a)));
  double m = std::round(v / std::pow(10.0, e));
  if (std::abs(m) >= 10.0) {
    m /= 10.0;
    ++e;
  }
  std::snprintf(buf, sizeof(buf), "%.0fe%d", m, e);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid expansion per task

namespace {

struct SyntheticAxes {
  long m, n, rank;
  std::vector<long> sample_sizes;
  std::vector<long> depths;
  std::vector<std::string> optimizers;
  std::vector<std::string> penalties;
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  double lr, init_std, loss_floor;
  long max_iters, snapshot_every, top_sv;
  bool amsgrad;
  double momentum;  // NaN = rule default
};

std::vector<std::uint64_t> seeds_from(const ConfigFile& cfg,
                                      const GridOptions& options) {
  if (options.seeds_override) return *options.seeds_override;
  if (cfg.has("seeds")) {
    std::vector<std::uint64_t> out;
    for (long v : cfg.integers("seeds")) out.push_back(static_cast<std::uint64_t>(v));
    return out;
  }
  return {0, 1, 2, 3, 4};
}

SyntheticAxes synthetic_axes(const ConfigFile& cfg, const GridOptions& options) {
  SyntheticAxes ax;
  ax.m = cfg.integer("m", 100);
  ax.n = cfg.integer("n", 100);
  ax.rank = cfg.integer("rank", 5);
  ax.sample_sizes = cfg.has("sample_size") ? cfg.integers("sample_size") : std::vector<long>{2000};
  ax.depths = cfg.has("depth") ? cfg.integers("depth") : std::vector<long>{1};
  ax.optimizers = cfg.has("optimizer") ? cfg.strings("optimizer") : std::vector<std::string>{"adam"};
  ax.penalties = cfg.has("penalty") ? cfg.strings("penalty") : std::vector<std::string>{"none"};
  ax.lambdas = cfg.has("lambda") ? cfg.nums("lambda") : std::vector<double>{0.0};
  ax.seeds = seeds_from(cfg, options);
  ax.lr = cfg.num("lr", 1e-3);
  ax.init_std = cfg.num("init_std", 1e-3);
  ax.loss_floor = cfg.num("loss_floor", 1e-7);
  ax.max_iters = cfg.integer("max_iters", 500000);
  ax.snapshot_every = cfg.integer("snapshot_every", 100);
  ax.top_sv = cfg.integer("top_sv", 10);
  ax.amsgrad = cfg.str("amsgrad", "false") == "true";
  ax.momentum = cfg.num("momentum", std::numeric_limits<double>::quiet_NaN());
  return ax;
}

engine::TrainConfig make_train_config(const SyntheticAxes& ax, const std::string& opt_name,
                                      const penalty::PenaltySpec& pen, std::uint64_t seed) {
  engine::TrainConfig tc;
  tc.max_iters = ax.max_iters;
  tc.loss_floor = ax.loss_floor;
  tc.snapshot_every = ax.snapshot_every;
  tc.seed = seed;
  tc.top_sv = static_cast<int>(ax.top_sv);
  tc.penalty = pen;
  tc.optimizer = opt::OptimizerSpec::defaults(opt::OptimizerSpec::parse_kind(opt_name));
  tc.optimizer.lr = ax.lr;
  tc.optimizer.amsgrad = ax.amsgrad;
  if (!std::isnan(ax.momentum)) tc.optimizer.momentum = ax.momentum;
  return tc;
}

RunRecord run_synthetic_cell(const SyntheticAxes& ax, RunRecord base,
                             const engine::TrainConfig& tc, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  data::SyntheticSpec dspec;
  dspec.m = ax.m;
  dspec.n = ax.n;
  dspec.rank = static_cast<int>(ax.rank);
  dspec.sample_size = base.sample_size;
  dspec.seed = base.seed;
  const auto data = data::generate_low_rank(dspec);

  std::vector<Eigen::Index> dims(static_cast<size_t>(base.depth) + 1, ax.n);
  dims.back() = ax.m;
  for (size_t i = 1; i + 1 < dims.size(); ++i) dims[i] = std::min(ax.m, ax.n);
  auto net = model::init_gaussian(dims, ax.init_std,
                                  base.seed ^ 0x5bf03635ebbc5935ULL);

  auto result = engine::train(std::move(net), data, tc);
  const auto& last = result.snapshots.back();

  const fs::path cell_dir = fs::path(out_dir) / base.cell_key;
  fs::create_directories(cell_dir);
  const std::string snap_path =
      (cell_dir / ("seed" + std::to_string(base.seed) + ".csv")).string();
  engine::write_snapshots_csv(snap_path, result.snapshots);

  base.final_train_loss = last.train_loss;
  base.final_test_error = last.test_error;
  base.final_effective_rank = last.effective_rank;
  base.rounded_rank = std::isfinite(last.effective_rank)
                          ? static_cast<long>(std::llround(last.effective_rank))
                          : -1;
  base.stop_reason = engine::stop_reason_name(result.stop_reason);
  base.final_iter = result.final_iter;
  base.snapshot_path = snap_path;
  base.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return base;
}

RunRecord run_baseline_cell(const SyntheticAxes& ax, RunRecord base, const ConfigFile& cfg,
                            const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  data::SyntheticSpec dspec;
  dspec.m = ax.m;
  dspec.n = ax.n;
  dspec.rank = static_cast<int>(ax.rank);
  dspec.sample_size = base.sample_size;
  dspec.seed = base.seed;
  const auto data = data::generate_low_rank(dspec);

  baseline::BaselineResult res;
  if (base.optimizer == "soft_impute") {
    res = baseline::soft_impute_ladder(
        data, static_cast<int>(cfg.integer("ladder_steps", 10)),
        cfg.num("ladder_top_frac", 0.5), cfg.num("ladder_floor_frac", 0.02),
        cfg.integer("max_iters", 200), cfg.num("tol", 1e-6));
  } else if (base.optimizer == "nuclear_min") {
    res = baseline::nuclear_min(data, cfg.integer("max_iters", 3000), cfg.num("tol", 1e-6));
  } else {
    throw InvalidConfigError("baseline: unknown method '" + base.optimizer + "'");
  }

  const auto svd = spectral::svd(res.estimate);
  engine::TrajectorySnapshot snap;
  snap.iter = res.iterations;
  snap.train_loss = engine::masked_loss(res.estimate, data);
  snap.test_error = engine::test_error(res.estimate, data);
  snap.effective_rank = spectral::effective_rank(svd.sigma);
  snap.top_singular_values = svd.sigma.head(std::min<Eigen::Index>(10, svd.sigma.size()));

  const fs::path cell_dir = fs::path(out_dir) / base.cell_key;
  fs::create_directories(cell_dir);
  const std::string snap_path =
      (cell_dir / ("seed" + std::to_string(base.seed) + ".csv")).string();
  engine::write_snapshots_csv(snap_path, {snap});

  base.final_train_loss = snap.train_loss;
  base.final_test_error = snap.test_error;
  base.final_effective_rank = snap.effective_rank;
  base.rounded_rank = static_cast<long>(std::llround(snap.effective_rank));
  base.stop_reason = res.converged ? "converged" : "max_iters";
  base.final_iter = res.iterations;
  base.snapshot_path = snap_path;
  base.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return base;
}

std::string resolve_dataset(const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || fs::exists(path)) return path;
  const char* root = std::getenv("LOWRANK_DATA_ROOT");
  if (root != nullptr && *root != '\0') {
    const fs::path joined = fs::path(root) / path;
    if (fs::exists(joined)) return joined.string();
  }
  return path;
}

RunRecord run_movielens_cell(RunRecord base, const ConfigFile& cfg, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dataset = resolve_dataset(cfg.require_str("dataset"));
  const double split = cfg.num("split", 0.9);
  const auto ds = data::load_ratings_file(dataset);
  auto [train, test] = data::split_ratings(ds, split, base.seed);

  engine::TrajectorySnapshot snap;
  const std::string model_name = cfg.str("model", "lnn_bias");
  if (model_name == "lnn_bias") {
    mlens::LnnBiasConfig mc = mlens::LnnBiasConfig::defaults();
    mc.optimizer = opt::OptimizerSpec::defaults(
        opt::OptimizerSpec::parse_kind(base.optimizer));
    mc.optimizer.lr = cfg.num("lr", 5e-4);
    mc.penalty = penalty::PenaltySpec::parse(base.penalty, base.lambda);
    mc.max_iters = cfg.integer("max_iters", 20000);
    mc.seed = base.seed;
    const auto res = mlens::train_lnn_bias(train, test, mc);
    const auto svd = spectral::svd(res.weight);
    snap.iter = res.iters;
    snap.train_loss = res.train_rmse;
    snap.test_error = res.test_rmse;
    snap.effective_rank = spectral::effective_rank(svd.sigma);
    snap.top_singular_values = svd.sigma.head(std::min<Eigen::Index>(10, svd.sigma.size()));
  } else if (model_name == "embedding") {
    mlens::EmbeddingConfig mc = mlens::EmbeddingConfig::defaults();
    mc.optimizer = opt::OptimizerSpec::defaults(
        opt::OptimizerSpec::parse_kind(base.optimizer));
    mc.optimizer.lr = cfg.num("lr", 1e-3);
    mc.embed_dim = static_cast<int>(cfg.integer("embed_dim", 64));
    mc.batch_size = static_cast<int>(cfg.integer("batch_size", 256));
    mc.epochs = static_cast<int>(cfg.integer("epochs", 100));
    if (base.penalty == "ratio") {
      mc.lambda_user = cfg.num("lambda_user", base.lambda);
      mc.lambda_item = cfg.num("lambda_item", 0.0);
    } else {
      mc.lambda_user = 0.0;
      mc.lambda_item = 0.0;
    }
    mc.seed = base.seed;
    data::RatingsDataset train_ds;
    train_ds.n_users = ds.n_users;
    train_ds.n_items = ds.n_items;
    for (size_t t = 0; t < train.obs_row.size(); ++t)
      train_ds.triples.push_back({train.obs_row[t], train.obs_col[t],
                                  train.obs_val(static_cast<Eigen::Index>(t)), 0});
    const auto res = mlens::train_embedding(train_ds, test, mc);
    snap.iter = res.epochs_run;
    snap.train_loss = res.train_rmse;
    snap.test_error = res.test_rmse;
    const auto svd = spectral::svd(res.model.user_embed);
    snap.effective_rank = spectral::effective_rank(svd.sigma);
    snap.top_singular_values = svd.sigma.head(std::min<Eigen::Index>(10, svd.sigma.size()));
  } else {
    throw InvalidConfigError("movielens: unknown model '" + model_name + "'");
  }

  const fs::path cell_dir = fs::path(out_dir) / base.cell_key;
  fs::create_directories(cell_dir);
  const std::string snap_path =
      (cell_dir / ("seed" + std::to_string(base.seed) + ".csv")).string();
  engine::write_snapshots_csv(snap_path, {snap});

  base.final_train_loss = snap.train_loss;
  base.final_test_error = snap.test_error;
  base.final_effective_rank = snap.effective_rank;
  base.rounded_rank = static_cast<long>(std::llround(snap.effective_rank));
  base.stop_reason = "max_iters";
  base.final_iter = snap.iter;
  base.snapshot_path = snap_path;
  base.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return base;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid runner

GridSummary run_grid(const std::string& config_path, const GridOptions& options) {
  const ConfigFile cfg = ConfigFile::parse_file(config_path);
  const std::string task = cfg.str("task", "synthetic");
  std::string out_dir = options.out_override.value_or(cfg.str("out", "runs/grid"));
  fs::create_directories(out_dir);
  const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();

  // Existing records allow re-runs to skip completed work.
  std::map<std::string, RunRecord> done;
  if (!options.force && fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    json j;
    in >> j;
    for (const auto& rj : j.value("runs", json::array())) {
      RunRecord r = record_from_json(rj);
      if (!r.config_hash.empty() &&
          (r.snapshot_path.empty() || fs::exists(r.snapshot_path)))
        done[r.config_hash] = r;
    }
  }

  std::vector<PlannedRun> plan;
  const auto axes = synthetic_axes(cfg, options);

  if (task == "synthetic") {
    for (long depth : axes.depths)
      for (const auto& opt_name : axes.optimizers)
        for (const auto& pen_name : axes.penalties)
          for (double lambda : axes.lambdas)
            for (long nsamp : axes.sample_sizes)
              for (std::uint64_t seed : axes.seeds) {
                const auto pen = penalty::PenaltySpec::parse(
                    pen_name, pen_name == "none" ? 0.0 : lambda);
                PlannedRun pr;
                pr.seeded.depth = static_cast<int>(depth);
                pr.seeded.optimizer = opt_name;
                pr.seeded.penalty = pen.name();
                pr.seeded.lambda = pen.lambda;
                pr.seeded.sample_size = nsamp;
                pr.seeded.seed = seed;
                pr.seeded.cell_key = sanitize(opt_name + "_d" + std::to_string(depth) + "_" +
                                              pen.name() + "_l" + fmt_g(pen.lambda) + "_n" +
                                              std::to_string(nsamp));
                const auto tc = make_train_config(axes, opt_name, pen, seed);
                std::ostringstream canon;
                canon << "synthetic|m=" << axes.m << "|n=" << axes.n << "|rank=" << axes.rank
                      << "|samp=" << nsamp << "|depth=" << depth << "|opt=" << opt_name
                      << "|lr=" << axes.lr << "|pen=" << pen.name() << "|lam=" << pen.lambda
                      << "|iters=" << axes.max_iters << "|floor=" << axes.loss_floor
                      << "|std=" << axes.init_std << "|seed=" << seed;
                if (axes.amsgrad) canon << "|amsgrad=1";
                if (!std::isnan(axes.momentum)) canon << "|mom=" << axes.momentum;
                pr.canonical = canon.str();
                RunRecord base = pr.seeded;
                pr.execute = [axes, base, tc, out_dir]() {
                  return run_synthetic_cell(axes, base, tc, out_dir);
                };
                plan.push_back(std::move(pr));
              }
  } else if (task == "baseline") {
    const auto methods = cfg.has("method")
                             ? cfg.strings("method")
                             : std::vector<std::string>{"soft_impute", "nuclear_min"};
    for (const auto& method : methods)
      for (long nsamp : axes.sample_sizes)
        for (std::uint64_t seed : axes.seeds) {
          PlannedRun pr;
          pr.seeded.depth = 0;
          pr.seeded.optimizer = method;
          pr.seeded.penalty = "-";
          pr.seeded.sample_size = nsamp;
          pr.seeded.seed = seed;
          pr.seeded.cell_key = sanitize(method + "_n" + std::to_string(nsamp));
          std::ostringstream canon;
          canon << "baseline|m=" << axes.m << "|n=" << axes.n << "|rank=" << axes.rank
                << "|samp=" << nsamp << "|method=" << method << "|seed=" << seed;
          pr.canonical = canon.str();
          RunRecord base = pr.seeded;
          pr.execute = [axes, base, cfg, out_dir]() {
            return run_baseline_cell(axes, base, cfg, out_dir);
          };
          plan.push_back(std::move(pr));
        }
  } else if (task == "movielens") {
    const std::string dataset = resolve_dataset(cfg.require_str("dataset"));
    if (!fs::exists(dataset))
      throw InvalidConfigError("config: dataset not found: '" + dataset +
                               "' (set LOWRANK_DATA_ROOT or use an absolute path)");
    const auto optimizers = axes.optimizers;
    const auto penalties = axes.penalties;
    for (const auto& opt_name : optimizers)
      for (const auto& pen_name : penalties)
        for (double lambda : axes.lambdas)
          for (std::uint64_t seed : axes.seeds) {
            PlannedRun pr;
            pr.seeded.depth = 1;
            pr.seeded.optimizer = opt_name;
            pr.seeded.penalty = pen_name;
            pr.seeded.lambda = pen_name == "none" ? 0.0 : lambda;
            pr.seeded.sample_size = 0;
            pr.seeded.seed = seed;
            pr.seeded.cell_key = sanitize(cfg.str("model", "lnn_bias") + "_" + opt_name + "_" +
                                          pen_name + "_l" + fmt_g(pr.seeded.lambda));
            std::ostringstream canon;
            canon << "movielens|model=" << cfg.str("model", "lnn_bias")
                  << "|split=" << cfg.num("split", 0.9) << "|opt=" << opt_name
                  << "|pen=" << pen_name << "|lam=" << pr.seeded.lambda
                  << "|iters=" << cfg.integer("max_iters", 20000) << "|seed=" << seed;
            pr.canonical = canon.str();
            RunRecord base = pr.seeded;
            pr.execute = [base, cfg, out_dir]() {
              return run_movielens_cell(base, cfg, out_dir);
            };
            plan.push_back(std::move(pr));
          }
  } else {
    throw InvalidConfigError("run_grid: unknown task '" + task + "'");
  }

  GridSummary summary;
  summary.out_dir = out_dir;
  summary.manifest_path = manifest_path;
  std::vector<RunRecord> results(plan.size());
  std::vector<char> failed(plan.size(), 0);
  parallel_for(plan.size(), options.jobs, [&](size_t i) {
    auto& pr = plan[i];
    const std::string hash = config_hash(pr.canonical);
    const auto hit = done.find(hash);
    if (hit != done.end()) {
      results[i] = hit->second;
      return;
    }
    try {
      results[i] = pr.execute();
    } catch (const std::exception& e) {
      results[i] = pr.seeded;
      results[i].stop_reason = std::string("failed: ") + e.what();
      results[i].final_test_error = std::numeric_limits<double>::quiet_NaN();
      results[i].final_effective_rank = std::numeric_limits<double>::quiet_NaN();
      failed[i] = 1;
    }
    results[i].config_hash = hash;
  });

  for (size_t i = 0; i < results.size(); ++i) {
    summary.failures += failed[i];
    summary.records.push_back(results[i]);
  }
  std::stable_sort(summary.records.begin(), summary.records.end(),
                   [](const RunRecord& a, const RunRecord& b) {
                     return std::tie(a.cell_key, a.seed) < std::tie(b.cell_key, b.seed);
                   });

  json manifest;
  manifest["task"] = task;
  json cfg_echo = json::object();
  for (const auto& [k, v] : cfg.raw()) cfg_echo[k] = v;
  manifest["config"] = cfg_echo;
  manifest["runs"] = json::array();
  for (const auto& r : summary.records) manifest["runs"].push_back(record_to_json(r));
  std::ofstream mout(manifest_path);
  mout << manifest.dump(2) << "\n";

  // Summary CSV: one row per cell, mean and standard error over seeds.
  std::map<std::string, std::vector<const RunRecord*>> cells;
  for (const auto& r : summary.records) cells[r.cell_key].push_back(&r);
  std::ofstream sout(fs::path(out_dir) / "summary.csv");
  sout << "cell_key,depth,optimizer,penalty,lambda,sample_size,n_seeds,"
          "test_error_mean,test_error_stderr,effective_rank_mean,effective_rank_stderr,"
          "rank_rounded\n";
  for (const auto& [key, rs] : cells) {
    std::vector<double> errs, ranks;
    for (const auto* r : rs)
      if (std::isfinite(r->final_test_error)) {
        errs.push_back(r->final_test_error);
        ranks.push_back(r->final_effective_rank);
      }
    const auto* head = rs.front();
    sout << key << ',' << head->depth << ',' << head->optimizer << ',' << head->penalty << ','
         << fmt_g(head->lambda) << ',' << head->sample_size << ',' << rs.size() << ','
         << fmt_g(mean_of(errs)) << ',' << fmt_g(stderr_of(errs)) << ','
         << fmt_g(mean_of(ranks)) << ',' << fmt_g(stderr_of(ranks)) << ','
         << (ranks.empty() ? -1L : static_cast<long>(std::llround(mean_of(ranks)))) << "\n";
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("manifest: cannot open '" + path + "'");
  json j;
  in >> j;
  return j;
}

const std::vector<std::string> kPenaltyOrder = {
    "ratio",
    "schatten_ratio:1/2:2/3",
    "schatten_ratio:1/3:2/3",
    "schatten_ratio:1/3:1/2",
    "nuclear",
    "none",
};

const std::vector<std::string> kOptimizerOrder = {
    "adam", "adagrad", "adamax", "rmsprop", "gd",
    "adamw", "nadam", "radam", "adadelta", "gd_momentum",
};

}  // namespace

std::string report_table(const std::string& manifest_path, const std::string& preset,
                         const std::string& csv_out) {
  const json manifest = load_manifest(manifest_path);
  std::vector<RunRecord> runs;
  for (const auto& rj : manifest.value("runs", json::array()))
    runs.push_back(record_from_json(rj));

  // Aggregate over seeds.
  struct Cell {
    std::vector<double> errs, ranks;
  };
  std::map<std::pair<std::string, int>, std::map<std::string, Cell>> table;
  std::set<std::string> penalties_seen;
  for (const auto& r : runs) {
    auto& cell = table[{r.optimizer, r.depth}][r.penalty];
    if (std::isfinite(r.final_test_error)) {
      cell.errs.push_back(r.final_test_error);
      cell.ranks.push_back(r.final_effective_rank);
    }
    penalties_seen.insert(r.penalty);
  }

  std::vector<std::string> cols;
  for (const auto& p : kPenaltyOrder)
    if (penalties_seen.count(p)) cols.push_back(p);
  for (const auto& p : penalties_seen)
    if (std::find(cols.begin(), cols.end(), p) == cols.end()) cols.push_back(p);

  std::vector<std::pair<std::string, int>> rows;
  for (const auto& opt_name : kOptimizerOrder)
    for (const auto& [key, _] : table)
      if (key.first == opt_name) rows.push_back(key);
  for (const auto& [key, _] : table)
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);

  std::ostringstream text;
  std::ostringstream csv;
  text << "preset: " << preset << "\n";
  text << "optimizer        depth";
  csv << "optimizer,depth";
  for (const auto& c : cols) {
    text << "  | " << c << " (Err / Rk)";
    csv << ',' << c << "_err," << c << "_rk";
  }
  text << "\n";
  csv << "\n";
  for (const auto& row : rows) {
    char head[64];
    std::snprintf(head, sizeof(head), "%-16s %5d", row.first.c_str(), row.second);
    text << head;
    csv << row.first << ',' << row.second;
    for (const auto& c : cols) {
      const auto it = table[row].find(c);
      if (it == table[row].end() || it->second.errs.empty()) {
        text << "  | —";
        csv << ",—,—";
        continue;
      }
      const double err = mean_of(it->second.errs);
      const long rk = static_cast<long>(std::llround(mean_of(it->second.ranks)));
      text << "  | " << fmt_err_cell(err) << " / " << rk;
      csv << ',' << fmt_err_cell(err) << ',' << rk;
    }
    text << "\n";
    csv << "\n";
  }
  if (!csv_out.empty()) {
    std::ofstream out(csv_out);
    if (!out) throw IoError("report: cannot open '" + csv_out + "'");
    out << csv.str();
  }
  return text.str();
}

void emit_plot_data(const std::string& manifest_path, const std::string& figure,
                    const std::string& csv_out) {
  const json manifest = load_manifest(manifest_path);
  std::vector<RunRecord> runs;
  for (const auto& rj : manifest.value("runs", json::array()))
    runs.push_back(record_from_json(rj));

  std::ofstream out(csv_out);
  if (!out) throw IoError("plotdata: cannot open '" + csv_out + "'");
  out << "series,x,metric,value\n";
  char buf[40];
  auto emit = [&](const std::string& series, double x, const char* metric, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << series << ',' << fmt_g(x) << ',' << metric << ',' << buf << "\n";
  };

  const bool sweep = figure == "fig4" || figure == "sweep" || figure == "rank10";
  for (const auto& r : runs) {
    if (sweep) {
      // Sample-size sweep: one point per run at x = |observed|.
      std::string series = r.optimizer;
      if (r.depth > 0) series += "_d" + std::to_string(r.depth) + "_" + sanitize(r.penalty);
      series += "_s" + std::to_string(r.seed);
      emit(series, static_cast<double>(r.sample_size), "test_error", r.final_test_error);
      emit(series, static_cast<double>(r.sample_size), "effective_rank",
           r.final_effective_rank);
      continue;
    }
    if (r.snapshot_path.empty() || !fs::exists(r.snapshot_path)) {
      out << "# warning: missing snapshot file for " << r.cell_key << " seed " << r.seed
          << "\n";
      continue;
    }
    const auto snaps = engine::read_snapshots_csv(r.snapshot_path);
    const std::string series = r.cell_key + "_s" + std::to_string(r.seed);
    for (const auto& s : snaps) {
      emit(series, static_cast<double>(s.iter), "train_loss", s.train_loss);
      emit(series, static_cast<double>(s.iter), "test_error", s.test_error);
      emit(series, static_cast<double>(s.iter), "effective_rank", s.effective_rank);
      for (Eigen::Index i = 0; i < s.top_singular_values.size(); ++i) {
        const std::string metric = "sv_" + std::to_string(i + 1);
        emit(series, static_cast<double>(s.iter), metric.c_str(), s.top_singular_values(i));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Dynamics validation driver

std::string validate_dynamics(const std::string& config_path, const std::string& json_out) {
  const ConfigFile cfg = ConfigFile::parse_file(config_path);
  const long size = cfg.integer("size", 6);
  const long depth = cfg.integer("depth", 3);
  const long instances = cfg.integer("instances", 20);
  const double lambda = cfg.num("lambda", 0.1);
  const std::uint64_t seed0 = static_cast<std::uint64_t>(cfg.integer("seed", 0));
  std::vector<double> alphas =
      cfg.has("alpha") ? cfg.nums("alpha") : std::vector<double>{1e-5, 5e-6, 2.5e-6};
  const auto regimes = cfg.has("regime")
                           ? cfg.strings("regime")
                           : std::vector<std::string>{"gd", "gd_penalty", "adam", "adam_penalty"};

  json report;
  report["size"] = size;
  report["depth"] = depth;
  report["alphas"] = alphas;
  report["lambda"] = lambda;
  json regimes_json = json::array();

  for (const auto& regime_name_str : regimes) {
    dynamics::Regime regime;
    if (regime_name_str == "gd") regime = dynamics::Regime::Gd;
    else if (regime_name_str == "gd_penalty") regime = dynamics::Regime::GdPenalty;
    else if (regime_name_str == "adam") regime = dynamics::Regime::Adam;
    else if (regime_name_str == "adam_penalty") regime = dynamics::Regime::AdamPenalty;
    else throw InvalidConfigError("validate_dynamics: unknown regime '" + regime_name_str + "'");

    const bool penalized =
        regime == dynamics::Regime::GdPenalty || regime == dynamics::Regime::AdamPenalty;
    const auto pen =
        penalized ? penalty::PenaltySpec::ratio(lambda) : penalty::PenaltySpec::none();

    json regime_json;
    regime_json["regime"] = regime_name_str;
    double worst_w = 0.0, worst_sv = 0.0, worst_psd = 0.0;
    json inst_json = json::array();
    for (long k = 0; k < instances; ++k) {
      Rng rng(seed0 + static_cast<std::uint64_t>(k) * 7919ULL);
      Eigen::MatrixXd gauss(size, size);
      for (long i = 0; i < size; ++i)
        for (long j = 0; j < size; ++j) gauss(i, j) = rng.normal();
      auto base_svd = spectral::svd(gauss);
      Eigen::VectorXd sigma(size);
      for (long i = 0; i < size; ++i) sigma(i) = 3.0 * std::pow(0.7, static_cast<double>(i));
      const Eigen::MatrixXd target =
          base_svd.u * sigma.asDiagonal() * base_svd.vt;
      const auto net = dynamics::balanced_net(target, static_cast<int>(depth));

      data::SyntheticSpec dspec;
      dspec.m = size;
      dspec.n = size;
      dspec.rank = static_cast<int>(std::min<long>(3, size));
      dspec.sample_size = size * size / 2;
      dspec.seed = seed0 + static_cast<std::uint64_t>(k);
      const auto data = data::generate_low_rank(dspec);

      json one;
      one["instance"] = k;
      json devs_w = json::array(), devs_sv = json::array();
      for (double a : alphas) {
        const auto rep = dynamics::validate_against_trainer(regime, net, data, a, pen);
        devs_w.push_back(rep.w_deviation);
        devs_sv.push_back(rep.sv_deviation);
        if (a == alphas.front()) {
          worst_w = std::max(worst_w, rep.w_deviation);
          worst_sv = std::max(worst_sv, rep.sv_deviation);
        }
      }
      one["w_deviation"] = devs_w;
      one["sv_deviation"] = devs_sv;
      if (regime == dynamics::Regime::Adam || regime == dynamics::Regime::AdamPenalty) {
        // PSD margin of the dense adaptive pre-conditioner on this instance.
        std::vector<Eigen::MatrixXd> grads, vars;
        for (const auto& layer : net.layers) {
          Eigen::MatrixXd g(layer.rows(), layer.cols());
          Eigen::MatrixXd v(layer.rows(), layer.cols());
          for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) {
              g(i, j) = rng.normal();
              v(i, j) = std::abs(rng.normal());
            }
          grads.push_back(g);
          vars.push_back(v);
        }
        const auto pre = dynamics::preconditioner_adam(net, grads, vars);
        const auto [lo, hi] = dynamics::eigen_real_range(pre.p_matrix);
        one["psd_min_eig"] = lo;
        one["psd_max_eig"] = hi;
        worst_psd = std::min(worst_psd, lo / std::max(hi, 1e-300));
      }
      inst_json.push_back(one);
    }
    regime_json["instances"] = inst_json;
    regime_json["max_w_deviation"] = worst_w;
    regime_json["max_sv_deviation"] = worst_sv;
    if (regime == dynamics::Regime::Adam || regime == dynamics::Regime::AdamPenalty)
      regime_json["worst_psd_margin"] = worst_psd;
    regimes_json.push_back(regime_json);
  }
  report["regimes"] = regimes_json;

  const std::string text = report.dump(2);
  if (!json_out.empty()) {
    std::ofstream out(json_out);
    if (!out) throw IoError("validate_dynamics: cannot open '" + json_out + "'");
    out << text << "\n";
  }
  return text;
}

}  // namespace lowrank::grid
