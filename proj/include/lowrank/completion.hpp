#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lowrank/model.hpp"
#include "lowrank/optimizer.hpp"
#include "lowrank/penalty.hpp"

namespace lowrank::engine {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Observed entries of a partially revealed matrix. Indices are unique and
/// in range; ground_truth is populated for synthetic runs so test error on
/// the unobserved complement can be evaluated.
struct MaskedMatrix {
  Index rows = 0;
  Index cols = 0;
  std::vector<int> obs_row;
  std::vector<int> obs_col;
  VectorXd obs_val;

  std::optional<MatrixXd> ground_truth;

  Index sample_size() const { return static_cast<Index>(obs_row.size()); }
  void validate() const;
};

/// Sum over observed entries of (w[i,j] - value)^2. The penalty term is not
/// included; it is reported separately by the trainer.
double masked_loss(const Eigen::Ref<const MatrixXd>& w, const MaskedMatrix& data);

/// Gradient of masked_loss with respect to w: 2*(w - value) on the observed
/// set, zero elsewhere.
MatrixXd masked_loss_gradient(const Eigen::Ref<const MatrixXd>& w, const MaskedMatrix& data);

/// Mean squared residual over the unobserved complement against the ground
/// truth. Throws UnsupportedError if no ground truth is attached or the
/// complement is empty.
double test_error(const Eigen::Ref<const MatrixXd>& w, const MaskedMatrix& data);

struct TrainConfig {
  long max_iters = 500000;
  double loss_floor = 1e-7;
  long snapshot_every = 100;
  std::uint64_t seed = 0;
  penalty::PenaltySpec penalty;
  opt::OptimizerSpec optimizer;
  int top_sv = 10;
  double divergence_cap = 1e12;

  void validate() const;
};

struct TrajectorySnapshot {
  long iter = 0;
  double train_loss = 0.0;
  double test_error = 0.0;  // NaN when unavailable
  double effective_rank = 0.0;
  VectorXd top_singular_values;
};

enum class StopReason { LossFloor, MaxIters, Diverged };
const char* stop_reason_name(StopReason reason);
StopReason parse_stop_reason(const std::string& name);

struct TrainResult {
  model::DeepLinearNet net;
  std::vector<TrajectorySnapshot> snapshots;
  StopReason stop_reason = StopReason::MaxIters;
  long final_iter = 0;
};

/// Full-batch training of Eq-style masked completion: each iteration
/// assembles the end product, adds lambda times the penalty gradient to the
/// masked-loss gradient, backpropagates through the factorization, and
/// applies the optimizer. Snapshots are taken at iteration 0, at 1/2/5-log
/// spaced early points, every snapshot_every iterations, and at termination.
TrainResult train(model::DeepLinearNet net, const MaskedMatrix& data, const TrainConfig& cfg);

/// True at the log-spaced early iterations and multiples of `every`.
bool snapshot_due(long iter, long every);

void write_snapshots_csv(const std::string& path,
                         const std::vector<TrajectorySnapshot>& snaps);
std::vector<TrajectorySnapshot> read_snapshots_csv(const std::string& path);

}  // namespace lowrank::engine
