#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "lowrank/completion.hpp"
#include "lowrank/data.hpp"
#include "lowrank/dynamics.hpp"
#include "lowrank/rng.hpp"
#include "lowrank/spectral.hpp"

using namespace lowrank;
using namespace lowrank::engine;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MaskedMatrix tiny_mask(Eigen::Index rows, Eigen::Index cols,
                       std::initializer_list<std::tuple<int, int, double>> obs) {
  MaskedMatrix m;
  m.rows = rows;
  m.cols = cols;
  std::vector<double> vals;
  for (const auto& [i, j, v] : obs) {
    m.obs_row.push_back(i);
    m.obs_col.push_back(j);
    vals.push_back(v);
  }
  m.obs_val = Eigen::Map<const VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return m;
}

}  // namespace

TEST_CASE("masked_loss pinned cases") {
  auto m = tiny_mask(3, 3, {{0, 0, 2.0}, {1, 2, -1.0}});
  MatrixXd w = MatrixXd::Zero(3, 3);
  w(0, 0) = 2.0;
  w(1, 2) = -1.0;
  CHECK(masked_loss(w, m) == 0.0);

  auto empty = tiny_mask(3, 3, {});
  CHECK(masked_loss(MatrixXd::Random(3, 3), empty) == 0.0);

  auto one = tiny_mask(2, 2, {{0, 0, 2.0}});
  MatrixXd w5 = MatrixXd::Zero(2, 2);
  w5(0, 0) = 5.0;
  CHECK(masked_loss(w5, one) == doctest::Approx(9.0));
}

TEST_CASE("masked matrix validation") {
  auto dup = tiny_mask(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}});
  CHECK_THROWS_AS(dup.validate(), InvalidInputError);
  auto oob = tiny_mask(2, 2, {{2, 0, 1.0}});
  CHECK_THROWS_AS(oob.validate(), InvalidInputError);
}

TEST_CASE("test_error pinned cases") {
  data::SyntheticSpec spec;
  spec.m = 100;
  spec.n = 100;
  spec.rank = 1;
  spec.sample_size = 2000;
  spec.seed = 4;
  auto data = data::generate_low_rank(spec);
  const MatrixXd& truth = *data.ground_truth;
  CHECK(test_error(truth, data) == 0.0);

  // Perturb four unobserved cells by one; the mean error is 4/(10^4 - |obs|).
  MatrixXd w = truth;
  std::set<std::pair<int, int>> observed;
  for (size_t t = 0; t < data.obs_row.size(); ++t)
    observed.insert({data.obs_row[t], data.obs_col[t]});
  int bumped = 0;
  for (int i = 0; i < 100 && bumped < 4; ++i)
    for (int j = 0; j < 100 && bumped < 4; ++j)
      if (!observed.count({i, j})) {
        w(i, j) += 1.0;
        ++bumped;
      }
  REQUIRE(bumped == 4);
  CHECK(test_error(w, data) == doctest::Approx(4.0 / (10000.0 - 2000.0)).epsilon(1e-12));

  MaskedMatrix full;
  full.rows = 2;
  full.cols = 1;
  full.obs_row = {0, 1};
  full.obs_col = {0, 0};
  full.obs_val = VectorXd::Zero(2);
  full.ground_truth = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(test_error(MatrixXd::Zero(2, 1), full), UnsupportedError);

  MaskedMatrix no_truth = tiny_mask(2, 2, {{0, 0, 1.0}});
  CHECK_THROWS_AS(test_error(MatrixXd::Zero(2, 2), no_truth), UnsupportedError);
}

TEST_CASE("trainer gradient matches finite differences for every penalty kind") {
  data::SyntheticSpec dspec;
  dspec.m = 6;
  dspec.n = 6;
  dspec.rank = 2;
  dspec.sample_size = 18;
  dspec.seed = 9;
  const auto data = data::generate_low_rank(dspec);

  // Balanced start with a healthy spectrum keeps every penalty smooth.
  Rng rng(40);
  MatrixXd gauss(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) gauss(i, j) = rng.normal();
  auto base = spectral::svd(gauss);
  VectorXd sigma(6);
  for (int i = 0; i < 6; ++i) sigma(i) = 2.5 * std::pow(0.72, i) + 0.4;
  const MatrixXd w0 = base.u * sigma.asDiagonal() * base.vt;
  const auto net = dynamics::balanced_net(w0, 3);

  const std::vector<penalty::PenaltySpec> kinds = {
      penalty::PenaltySpec::none(),
      penalty::PenaltySpec::ratio(0.3),
      penalty::PenaltySpec::nuclear(0.3),
      penalty::PenaltySpec::schatten(0.5, 0.3),
      penalty::PenaltySpec::schatten_ratio(1.0 / 3.0, 2.0 / 3.0, 0.3),
  };
  const double h = 1e-6;
  for (const auto& pen : kinds) {
    const MatrixXd w = end_product(net);
    MatrixXd grad_w = masked_loss_gradient(w, data);
    if (pen.active())
      grad_w += pen.lambda * penalty::penalty_gradient(pen, spectral::svd(w)).gradient;
    const auto grads = layer_gradients(net, grad_w);

    auto loss_at = [&](const model::DeepLinearNet& n) {
      const MatrixXd wp = end_product(n);
      double v = masked_loss(wp, data);
      if (pen.active()) v += pen.lambda * penalty::penalty_value(pen, wp);
      return v;
    };
    for (int layer = 0; layer < 3; ++layer) {
      model::DeepLinearNet probe = net;
      for (int i = 0; i < grads[layer].rows(); ++i)
        for (int j = 0; j < grads[layer].cols(); ++j) {
          probe.layers[layer](i, j) += h;
          const double up = loss_at(probe);
          probe.layers[layer](i, j) -= 2.0 * h;
          const double down = loss_at(probe);
          probe.layers[layer](i, j) += h;
          const double fd = (up - down) / (2.0 * h);
          const double denom = std::max(std::abs(fd), 1e-4);
          INFO("penalty ", pen.name(), " layer ", layer);
          CHECK(std::abs(grads[layer](i, j) - fd) / denom <= 1e-5);
        }
    }
  }
}

TEST_CASE("gd training loss is monotone without penalty") {
  data::SyntheticSpec dspec;
  dspec.m = 100;
  dspec.n = 100;
  dspec.rank = 5;
  dspec.sample_size = 2000;
  dspec.seed = 0;
  const auto data = data::generate_low_rank(dspec);

  TrainConfig cfg;
  cfg.max_iters = 1200;
  cfg.snapshot_every = 25;
  cfg.optimizer = opt::OptimizerSpec::defaults(opt::OptKind::Gd);
  cfg.optimizer.lr = 1e-3;

  auto net = model::init_gaussian({100, 100}, 1e-3, 3);
  const auto result = train(std::move(net), data, cfg);
  REQUIRE(result.snapshots.size() > 5);
  for (size_t i = 1; i < result.snapshots.size(); ++i)
    CHECK(result.snapshots[i].train_loss <=
          result.snapshots[i - 1].train_loss + 1e-9);
}

TEST_CASE("snapshot cadence and termination bookkeeping") {
  CHECK(snapshot_due(0, 100));
  CHECK(snapshot_due(1, 100));
  CHECK(snapshot_due(2, 100));
  CHECK(snapshot_due(5, 100));
  CHECK(snapshot_due(50, 100));
  CHECK_FALSE(snapshot_due(3, 100));
  CHECK_FALSE(snapshot_due(99, 100));
  CHECK(snapshot_due(200, 100));

  data::SyntheticSpec dspec;
  dspec.m = 12;
  dspec.n = 12;
  dspec.rank = 2;
  dspec.sample_size = 70;
  dspec.seed = 2;
  const auto data = data::generate_low_rank(dspec);
  TrainConfig cfg;
  cfg.max_iters = 400;
  cfg.snapshot_every = 50;
  cfg.optimizer = opt::OptimizerSpec::defaults(opt::OptKind::Adam);
  cfg.optimizer.lr = 0.05;
  cfg.loss_floor = 1e-6;
  const auto result = train(model::init_gaussian({12, 12}, 1e-3, 5), data, cfg);
  for (size_t i = 1; i < result.snapshots.size(); ++i)
    CHECK(result.snapshots[i].iter > result.snapshots[i - 1].iter);
  CHECK(result.snapshots.back().iter == result.final_iter);
  if (result.stop_reason == StopReason::LossFloor)
    CHECK(result.snapshots.back().train_loss < cfg.loss_floor);
}

TEST_CASE("training is bit-reproducible") {
  data::SyntheticSpec dspec;
  dspec.m = 10;
  dspec.n = 10;
  dspec.rank = 2;
  dspec.sample_size = 50;
  dspec.seed = 7;
  const auto data = data::generate_low_rank(dspec);
  TrainConfig cfg;
  cfg.max_iters = 150;
  cfg.snapshot_every = 10;
  cfg.optimizer = opt::OptimizerSpec::defaults(opt::OptKind::Adam);
  cfg.penalty = penalty::PenaltySpec::ratio(0.05);

  const auto a = train(model::init_gaussian({10, 10}, 1e-3, 1), data, cfg);
  const auto b = train(model::init_gaussian({10, 10}, 1e-3, 1), data, cfg);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (size_t i = 0; i < a.snapshots.size(); ++i) {
    CHECK(a.snapshots[i].iter == b.snapshots[i].iter);
    CHECK(a.snapshots[i].train_loss == b.snapshots[i].train_loss);
    CHECK(a.snapshots[i].effective_rank == b.snapshots[i].effective_rank);
    CHECK((a.snapshots[i].top_singular_values - b.snapshots[i].top_singular_values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
}

TEST_CASE("divergence is recorded, not thrown") {
  data::SyntheticSpec dspec;
  dspec.m = 10;
  dspec.n = 10;
  dspec.rank = 2;
  dspec.sample_size = 60;
  dspec.seed = 3;
  const auto data = data::generate_low_rank(dspec);
  TrainConfig cfg;
  cfg.max_iters = 5000;
  cfg.optimizer = opt::OptimizerSpec::defaults(opt::OptKind::Gd);
  cfg.optimizer.lr = 10.0;  // far beyond stability
  const auto result = train(model::init_gaussian({10, 10}, 0.5, 2), data, cfg);
  CHECK(result.stop_reason == StopReason::Diverged);
  CHECK(result.snapshots.back().iter == result.final_iter);
}

TEST_CASE("snapshot csv round trip") {
  std::vector<TrajectorySnapshot> snaps(3);
  for (int i = 0; i < 3; ++i) {
    snaps[i].iter = i * 10;
    snaps[i].train_loss = std::pow(0.1, i);
    snaps[i].test_error = 0.5 * i;
    snaps[i].effective_rank = 5.0 + i;
    snaps[i].top_singular_values = VectorXd::LinSpaced(4, 1.0, 4.0) * (i + 1);
  }
  const auto path = std::filesystem::temp_directory_path() / "lowrank_snap_test.csv";
  write_snapshots_csv(path.string(), snaps);
  const auto loaded = read_snapshots_csv(path.string());
  REQUIRE(loaded.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(loaded[i].iter == snaps[i].iter);
    CHECK(loaded[i].train_loss == snaps[i].train_loss);
    CHECK((loaded[i].top_singular_values - snaps[i].top_singular_values)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  std::filesystem::remove(path);
}
