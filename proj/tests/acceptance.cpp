// Acceptance suite: one pass/fail line per criterion, exit 1 on any failure.
//
// Expensive training cells are cached on disk (ACCEPTANCE_CACHE env var or
// ./acceptance_cache) keyed by a canonical config string, so interrupted or
// repeated invocations reuse completed work. Delete the cache directory for
// a cold run.
//
// The MovieLens criterion needs the 100K ratings file; it is skipped with a
// notice when the dataset is not present (looked up via MOVIELENS_PATH or
// LOWRANK_DATA_ROOT).

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lowrank/baselines.hpp"
#include "lowrank/completion.hpp"
#include "lowrank/data.hpp"
#include "lowrank/dynamics.hpp"
#include "lowrank/grid.hpp"
#include "lowrank/movielens.hpp"
#include "lowrank/penalty.hpp"
#include "lowrank/rng.hpp"
#include "lowrank/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lowrank;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << std::endl;
  if (!pass) ++g_failures;
}

void report_skip(const std::string& name, const std::string& why) {
  std::cout << "[SKIP] " << name << ": " << why << std::endl;
}

// ---------------------------------------------------------------------------
// Cached synthetic training runs

struct CellOutcome {
  double test_error = 0.0;
  double effective_rank = 0.0;
  double train_loss = 0.0;
  long iters = 0;
  std::string stop;
};

fs::path cache_dir() {
  const char* env = std::getenv("ACCEPTANCE_CACHE");
  fs::path dir = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("acceptance_cache");
  fs::create_directories(dir);
  return dir;
}

CellOutcome cached(const std::string& canonical, const std::function<CellOutcome()>& compute) {
  const fs::path file = cache_dir() / (grid::config_hash(canonical) + ".json");
  if (fs::exists(file)) {
    std::ifstream in(file);
    json j;
    in >> j;
    if (j.value("canonical", "") == canonical) {
      CellOutcome o;
      o.test_error = j.value("test_error", 0.0);
      o.effective_rank = j.value("effective_rank", 0.0);
      o.train_loss = j.value("train_loss", 0.0);
      o.iters = j.value("iters", 0L);
      o.stop = j.value("stop", "");
      return o;
    }
  }
  const CellOutcome o = compute();
  json j{{"canonical", canonical},   {"test_error", o.test_error},
         {"effective_rank", o.effective_rank}, {"train_loss", o.train_loss},
         {"iters", o.iters},         {"stop", o.stop}};
  std::ofstream out(file);
  out << j.dump(2) << "\n";
  return o;
}

struct SynthCell {
  long m = 100, n = 100, rank = 5, sample = 2000;
  int depth = 1;
  std::string optimizer = "adam";
  penalty::PenaltySpec pen;
  double lr = 1e-3;
  long max_iters = 500000;
  double loss_floor = 1e-7;
};

std::string canonical_of(const SynthCell& c, std::uint64_t seed) {
  std::ostringstream ss;
  ss << "synthetic|m=" << c.m << "|n=" << c.n << "|rank=" << c.rank << "|samp=" << c.sample
     << "|depth=" << c.depth << "|opt=" << c.optimizer << "|lr=" << c.lr
     << "|pen=" << c.pen.name() << "|lam=" << c.pen.lambda << "|iters=" << c.max_iters
     << "|floor=" << c.loss_floor << "|std=0.001|seed=" << seed;
  return ss.str();
}

CellOutcome run_cell(const SynthCell& c, std::uint64_t seed) {
  return cached(canonical_of(c, seed), [&] {
    data::SyntheticSpec dspec;
    dspec.m = c.m;
    dspec.n = c.n;
    dspec.rank = static_cast<int>(c.rank);
    dspec.sample_size = c.sample;
    dspec.seed = seed;
    const auto data = data::generate_low_rank(dspec);

    std::vector<Eigen::Index> dims(static_cast<size_t>(c.depth) + 1, c.n);
    dims.back() = c.m;
    for (size_t i = 1; i + 1 < dims.size(); ++i) dims[i] = std::min(c.m, c.n);
    auto net = model::init_gaussian(dims, 1e-3, seed ^ 0x5bf03635ebbc5935ULL);

    engine::TrainConfig tc;
    tc.max_iters = c.max_iters;
    tc.loss_floor = c.loss_floor;
    tc.snapshot_every = 1000;
    tc.seed = seed;
    tc.penalty = c.pen;
    tc.optimizer = opt::OptimizerSpec::defaults(opt::OptimizerSpec::parse_kind(c.optimizer));
    tc.optimizer.lr = c.lr;

    const auto result = engine::train(std::move(net), data, tc);
    const auto& last = result.snapshots.back();
    CellOutcome o;
    o.test_error = last.test_error;
    o.effective_rank = last.effective_rank;
    o.train_loss = last.train_loss;
    o.iters = result.final_iter;
    o.stop = engine::stop_reason_name(result.stop_reason);
    return o;
  });
}

struct CellStats {
  double err_mean = 0.0;
  double rank_mean = 0.0;
  long rank_rounded = 0;
};

CellStats stats_over_seeds(const SynthCell& c, const std::vector<std::uint64_t>& seeds) {
  CellStats s;
  for (std::uint64_t seed : seeds) {
    const auto o = run_cell(c, seed);
    s.err_mean += o.test_error;
    s.rank_mean += o.effective_rank;
  }
  s.err_mean /= static_cast<double>(seeds.size());
  s.rank_mean /= static_cast<double>(seeds.size());
  s.rank_rounded = std::llround(s.rank_mean);
  return s;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria

void criterion1() {
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool all = true;
  std::ostringstream detail;

  // Penalized cells plateau well before 80k iterations (the ratio penalty
  // keeps the masked sum oscillating above the 1e-7 floor, so they never
  // early-stop); unpenalized cells reach the floor on their own.
  SynthCell adam_ratio;
  adam_ratio.optimizer = "adam";
  adam_ratio.depth = 1;
  adam_ratio.pen = penalty::PenaltySpec::ratio(0.05);
  adam_ratio.max_iters = 80000;
  const auto a = stats_over_seeds(adam_ratio, seeds);
  const bool ok_a = a.err_mean <= 1e-5 && a.rank_rounded == 5;
  all &= ok_a;
  detail << "adam/1/ratio err=" << fmt(a.err_mean) << " rk=" << a.rank_rounded
         << (ok_a ? " ok" : " VIOLATION") << "; ";

  SynthCell adam_none = adam_ratio;
  adam_none.pen = penalty::PenaltySpec::none();
  adam_none.max_iters = 500000;
  const auto b = stats_over_seeds(adam_none, seeds);
  const bool ok_b = b.err_mean >= 0.5 && b.rank_mean >= 50.0;
  all &= ok_b;
  detail << "adam/1/none err=" << fmt(b.err_mean) << " rk=" << fmt(b.rank_mean)
         << (ok_b ? " ok" : " VIOLATION") << "; ";

  SynthCell gd_none = adam_none;
  gd_none.optimizer = "gd";
  const auto c = stats_over_seeds(gd_none, seeds);
  const bool ok_c = c.err_mean >= 0.5 && c.rank_mean >= 50.0;
  all &= ok_c;
  detail << "gd/1/none err=" << fmt(c.err_mean) << " rk=" << fmt(c.rank_mean)
         << (ok_c ? " ok" : " VIOLATION") << "; ";

  SynthCell gd3 = gd_none;
  gd3.depth = 3;
  const auto d = stats_over_seeds(gd3, seeds);
  const bool ok_d = d.err_mean <= 1e-3 && (d.rank_rounded == 5 || d.rank_rounded == 6);
  all &= ok_d;
  detail << "gd/3/none err=" << fmt(d.err_mean) << " rk=" << d.rank_rounded
         << (ok_d ? " ok" : " VIOLATION") << "; ";

  SynthCell adamax_ratio = adam_ratio;  // keeps the 80k plateau cap
  adamax_ratio.optimizer = "adamax";
  const auto e = stats_over_seeds(adamax_ratio, seeds);
  const bool ok_e = e.err_mean <= 1e-5 && e.rank_rounded == 5;
  all &= ok_e;
  detail << "adamax/1/ratio err=" << fmt(e.err_mean) << " rk=" << e.rank_rounded
         << (ok_e ? " ok" : " VIOLATION");

  report("criterion 1 (headline completion cells)", all, detail.str());
}

void criterion2() {
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  bool ranks_ok = true;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  std::ostringstream detail;
  for (int depth = 1; depth <= 5; ++depth) {
    SynthCell cell;
    cell.optimizer = "adam";
    cell.depth = depth;
    cell.pen = penalty::PenaltySpec::ratio(1e-4);
    // At this weak lambda the masked sum transiently dips below 1e-7 within
    // the first ~2k iterations on deeper nets, far before the penalized
    // dynamics settle; these runs use a fixed budget with the floor
    // disabled and measure the plateau instead (reached by ~30k at depth 1,
    // earlier on deeper nets).
    cell.max_iters = 100000;
    cell.loss_floor = 1e-300;
    const auto s = stats_over_seeds(cell, seeds);
    ranks_ok &= s.rank_rounded == 5;
    lo = std::min(lo, s.err_mean);
    hi = std::max(hi, s.err_mean);
    detail << "d" << depth << " err=" << fmt(s.err_mean) << " rk=" << s.rank_rounded << "; ";
  }
  const bool span_ok = hi < 10.0 * lo;
  detail << "span=" << fmt(hi / lo) << "x";
  report("criterion 2 (depth invariance of adam+ratio)", ranks_ok && span_ok, detail.str());
}

void criterion3() {
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  SynthCell adam_ratio;
  adam_ratio.optimizer = "adam";
  adam_ratio.depth = 1;
  adam_ratio.pen = penalty::PenaltySpec::ratio(0.05);
  adam_ratio.max_iters = 80000;  // same cells as criterion 1, reused from cache
  const auto a = stats_over_seeds(adam_ratio, seeds);

  SynthCell gd3;
  gd3.optimizer = "gd";
  gd3.depth = 3;
  gd3.pen = penalty::PenaltySpec::none();
  const auto g = stats_over_seeds(gd3, seeds);

  double nuc_err = 0.0, si_err = 0.0;
  for (std::uint64_t seed : seeds) {
    const auto nuc = cached("baseline|nuclear_min|samp=2000|seed=" + std::to_string(seed), [&] {
      data::SyntheticSpec dspec;
      dspec.sample_size = 2000;
      dspec.seed = seed;
      const auto data = data::generate_low_rank(dspec);
      const auto res = baseline::nuclear_min(data, 4000, 1e-6);
      CellOutcome o;
      o.test_error = engine::test_error(res.estimate, data);
      o.effective_rank = spectral::effective_rank(spectral::svd(res.estimate).sigma);
      o.iters = res.iterations;
      o.stop = res.converged ? "converged" : "max_iters";
      return o;
    });
    const auto si = cached("baseline|soft_impute|samp=2000|seed=" + std::to_string(seed), [&] {
      data::SyntheticSpec dspec;
      dspec.sample_size = 2000;
      dspec.seed = seed;
      const auto data = data::generate_low_rank(dspec);
      const auto res = baseline::soft_impute_ladder(data);
      CellOutcome o;
      o.test_error = engine::test_error(res.estimate, data);
      o.effective_rank = spectral::effective_rank(spectral::svd(res.estimate).sigma);
      o.iters = res.iterations;
      o.stop = res.converged ? "converged" : "max_iters";
      return o;
    });
    nuc_err += nuc.test_error;
    si_err += si.test_error;
  }
  nuc_err /= static_cast<double>(seeds.size());
  si_err /= static_cast<double>(seeds.size());

  const bool order_ok = a.err_mean < g.err_mean && g.err_mean < nuc_err && nuc_err < si_err;
  const bool margin_ok = a.err_mean * 10.0 <= g.err_mean;
  std::ostringstream detail;
  detail << "adam:1+ratio=" << fmt(a.err_mean) << " < gd:3=" << fmt(g.err_mean)
         << " < nuclear_min=" << fmt(nuc_err) << " < soft_impute=" << fmt(si_err)
         << "; margin=" << fmt(g.err_mean / a.err_mean) << "x";
  report("criterion 3 (method ordering at 2000 samples)", order_ok && margin_ok, detail.str());
}

void criterion4() {
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  SynthCell cell;
  cell.rank = 10;
  cell.sample = 3000;
  cell.optimizer = "adam";
  cell.depth = 1;
  cell.pen = penalty::PenaltySpec::ratio(0.05);
  cell.max_iters = 80000;
  const auto s = stats_over_seeds(cell, seeds);
  const bool ok = s.rank_rounded == 10 && s.err_mean <= 1e-4;
  std::ostringstream detail;
  detail << "err=" << fmt(s.err_mean) << " rk=" << s.rank_rounded;
  report("criterion 4 (rank-10 replication at 3000 samples)", ok, detail.str());
}

void criterion5() {
  const int instances = 20;
  bool gd_ok = true, richardson_ok = true, adam_ok = true, psd_ok = true;
  double worst_gd = 0.0, worst_adam = 0.0, worst_margin = 0.0;

  for (int k = 0; k < instances; ++k) {
    Rng rng(1000 + static_cast<std::uint64_t>(k));
    Eigen::MatrixXd gauss(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) gauss(i, j) = rng.normal();
    const auto base = spectral::svd(gauss);
    Eigen::VectorXd sigma(6);
    for (int i = 0; i < 6; ++i) sigma(i) = 3.0 * std::pow(0.7, i);
    const Eigen::MatrixXd target = base.u * sigma.asDiagonal() * base.vt;
    const auto net = dynamics::balanced_net(target, 3);

    data::SyntheticSpec dspec;
    dspec.m = 6;
    dspec.n = 6;
    dspec.rank = 3;
    dspec.sample_size = 18;
    dspec.seed = 2000 + static_cast<std::uint64_t>(k);
    const auto data = data::generate_low_rank(dspec);

    for (auto regime : {dynamics::Regime::Gd, dynamics::Regime::GdPenalty}) {
      const auto pen = regime == dynamics::Regime::GdPenalty
                           ? penalty::PenaltySpec::ratio(0.1)
                           : penalty::PenaltySpec::none();
      const auto full = dynamics::validate_against_trainer(regime, net, data, 1e-5, pen);
      const auto half = dynamics::validate_against_trainer(regime, net, data, 5e-6, pen);
      gd_ok &= full.w_deviation < 1e-2 && full.sv_deviation < 1e-2;
      worst_gd = std::max({worst_gd, full.w_deviation, full.sv_deviation});
      if (full.w_deviation > 1e-8)
        richardson_ok &= half.w_deviation <= 0.75 * full.w_deviation;
    }
    for (auto regime : {dynamics::Regime::Adam, dynamics::Regime::AdamPenalty}) {
      const auto pen = regime == dynamics::Regime::AdamPenalty
                           ? penalty::PenaltySpec::ratio(0.1)
                           : penalty::PenaltySpec::none();
      const auto rep = dynamics::validate_against_trainer(regime, net, data, 1e-5, pen);
      adam_ok &= rep.w_deviation < 0.2 && rep.sv_deviation < 0.2;
      worst_adam = std::max({worst_adam, rep.w_deviation, rep.sv_deviation});
    }
    {
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
      psd_ok &= lo >= -1e-8 * std::max(hi, 1e-12);
      worst_margin = std::min(worst_margin, lo / std::max(hi, 1e-12));
    }
  }
  std::ostringstream detail;
  detail << "gd-max-dev=" << fmt(worst_gd) << " (<1e-2), richardson "
         << (richardson_ok ? "halves" : "FAILS") << ", adam-max-dev=" << fmt(worst_adam)
         << " (<0.2), psd-margin=" << fmt(worst_margin) << " (>=-1e-8)";
  report("criterion 5 (dynamics oracle)", gd_ok && richardson_ok && adam_ok && psd_ok,
         detail.str());
}

void criterion6() {
  bool ok = true;
  std::ostringstream detail;

  // Penalty gradients against central differences at 20 random points.
  {
    const std::vector<penalty::PenaltySpec> kinds = {
        penalty::PenaltySpec::ratio(1.0),
        penalty::PenaltySpec::nuclear(1.0),
        penalty::PenaltySpec::schatten(0.5, 1.0),
        penalty::PenaltySpec::schatten(1.0 / 3.0, 1.0),
        penalty::PenaltySpec::schatten(2.0 / 3.0, 1.0),
        penalty::PenaltySpec::schatten_ratio(0.5, 2.0 / 3.0, 1.0),
        penalty::PenaltySpec::schatten_ratio(1.0 / 3.0, 2.0 / 3.0, 1.0),
        penalty::PenaltySpec::schatten_ratio(1.0 / 3.0, 0.5, 1.0),
    };
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      Rng rng(3000 + trial);
      Eigen::MatrixXd g(5, 5);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) g(i, j) = rng.normal();
      const auto base = spectral::svd(g);
      Eigen::VectorXd sigma(5);
      for (int i = 0; i < 5; ++i) sigma(i) = 0.5 + 2.5 * std::pow(0.75, i);
      const Eigen::MatrixXd w = base.u * sigma.asDiagonal() * base.vt;
      for (const auto& spec : kinds) {
        const auto analytic = penalty::penalty_gradient(spec, spectral::svd(w)).gradient;
        const double h = 1e-5;
        Eigen::MatrixXd probe = w;
        Eigen::MatrixXd fd(5, 5);
        for (int i = 0; i < 5; ++i)
          for (int j = 0; j < 5; ++j) {
            probe(i, j) = w(i, j) + h;
            const double up = penalty::penalty_value(spec, probe);
            probe(i, j) = w(i, j) - h;
            const double down = penalty::penalty_value(spec, probe);
            probe(i, j) = w(i, j);
            fd(i, j) = (up - down) / (2.0 * h);
          }
        // Relative check with a 0.1%-of-scale floor under near-zero entries.
        const double floor = 1e-3 * std::max(fd.cwiseAbs().maxCoeff(), 1e-12);
        for (int i = 0; i < 5; ++i)
          for (int j = 0; j < 5; ++j) {
            const double denom = std::max(std::abs(fd(i, j)), floor);
            worst = std::max(worst, std::abs(analytic(i, j) - fd(i, j)) / denom);
          }
      }
    }
    ok &= worst <= 1e-5;
    detail << "penalty-fd=" << fmt(worst) << "; ";
  }

  // Effective-rank scale invariance at 1e-12.
  {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      Rng rng(4000 + trial);
      Eigen::VectorXd sigma(7);
      for (int i = 0; i < 7; ++i) sigma(i) = std::abs(rng.normal()) + 1e-3;
      std::sort(sigma.data(), sigma.data() + 7, std::greater<double>());
      const double base = spectral::effective_rank(sigma);
      for (double c : {1e-6, 0.25, 7.0, 1e9}) {
        const double scaled = spectral::effective_rank((c * sigma).eval());
        worst = std::max(worst, std::abs(scaled - base) / base);
      }
    }
    ok &= worst <= 1e-12;
    detail << "erank-scale=" << fmt(worst) << "; ";
  }

  // Depth-1 pre-conditioner is exactly the identity.
  {
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      Rng rng(5000 + trial);
      Eigen::MatrixXd w(4, 5);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) w(i, j) = rng.normal();
      const auto pre = dynamics::preconditioner_gd(w, 1);
      worst = std::max(
          worst,
          (pre.p_matrix - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff());
    }
    ok &= worst == 0.0;
    detail << "pw-identity=" << fmt(worst) << "; ";
  }

  // vec/kron identity on 50 random shape triples.
  {
    Rng shapes(6000);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto dim = [&] { return 1 + static_cast<Eigen::Index>(shapes.uniform_below(4)); };
      const Eigen::Index p = dim(), q = dim(), r = dim(), s = dim();
      Rng rng(6100 + static_cast<std::uint64_t>(trial));
      Eigen::MatrixXd a(p, q), x(q, r), b(r, s);
      for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < q; ++j) a(i, j) = rng.normal();
      for (Eigen::Index i = 0; i < q; ++i)
        for (Eigen::Index j = 0; j < r; ++j) x(i, j) = rng.normal();
      for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < s; ++j) b(i, j) = rng.normal();
      const Eigen::VectorXd lhs = spectral::vec((a * x * b).eval());
      const Eigen::VectorXd rhs = spectral::kron(b.transpose(), a) * spectral::vec(x);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() /
                                  (1.0 + lhs.cwiseAbs().maxCoeff()));
    }
    ok &= worst <= 1e-12;
    detail << "veckron=" << fmt(worst) << "; ";
  }

  // SoftImpute objective monotonicity on 10 random problems.
  {
    bool monotone = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      data::SyntheticSpec spec;
      spec.m = 20;
      spec.n = 20;
      spec.rank = 3;
      spec.sample_size = 200;
      spec.seed = 7000 + seed;
      const auto data = data::generate_low_rank(spec);
      const auto res = baseline::soft_impute(data, 0.5, 100, 1e-10);
      for (size_t i = 1; i < res.objective_trace.size(); ++i)
        monotone &= res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-9;
    }
    ok &= monotone;
    detail << "softimpute-monotone=" << (monotone ? "yes" : "NO");
  }

  report("criterion 6 (property suites)", ok, detail.str());
}

std::string find_movielens() {
  std::vector<fs::path> candidates;
  if (const char* p = std::getenv("MOVIELENS_PATH"); p != nullptr && *p != '\0')
    candidates.emplace_back(p);
  if (const char* root = std::getenv("LOWRANK_DATA_ROOT"); root != nullptr && *root != '\0') {
    candidates.emplace_back(fs::path(root) / "ml-100k" / "u.data");
    candidates.emplace_back(fs::path(root) / "u.data");
  }
  candidates.emplace_back("data/ml-100k/u.data");
  candidates.emplace_back("ml-100k/u.data");
  for (const auto& c : candidates)
    if (fs::exists(c)) return c.string();
  return "";
}

void criterion7() {
  const std::string path = find_movielens();
  if (path.empty()) {
    report_skip("criterion 7 (movielens 90:10, stretch)",
                "dataset not found (set MOVIELENS_PATH or LOWRANK_DATA_ROOT)");
    return;
  }
  auto [train, test] = data::load_movielens(path, 0.9, 0);

  mlens::LnnBiasConfig penalized = mlens::LnnBiasConfig::defaults();
  penalized.max_iters = 6000;
  const auto with_pen = mlens::train_lnn_bias(train, test, penalized);

  mlens::LnnBiasConfig plain = penalized;
  plain.penalty = penalty::PenaltySpec::none();
  const auto without = mlens::train_lnn_bias(train, test, plain);

  const bool ok = with_pen.test_rmse <= 1.00 && without.test_rmse - with_pen.test_rmse >= 0.3;
  std::ostringstream detail;
  detail << "adam+ratio rmse=" << fmt(with_pen.test_rmse)
         << ", adam-only rmse=" << fmt(without.test_rmse);
  report("criterion 7 (movielens 90:10, stretch)", ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto want = [&](int k) { return only.empty() || only.count(k) > 0; };

  std::cout << "acceptance cache: " << cache_dir().string() << std::endl;
  if (want(6)) criterion6();
  if (want(5)) criterion5();
  if (want(1)) criterion1();
  if (want(2)) criterion2();
  if (want(3)) criterion3();
  if (want(4)) criterion4();
  if (want(7)) criterion7();

  if (g_failures > 0) {
    std::cout << g_failures << " criterion(s) failed" << std::endl;
    return 1;
  }
  std::cout << "all evaluated criteria passed" << std::endl;
  return 0;
}
