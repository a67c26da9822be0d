#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lowrank/data.hpp"
#include "lowrank/model.hpp"
#include "lowrank/optimizer.hpp"
#include "lowrank/penalty.hpp"

namespace lowrank::mlens {

using Eigen::MatrixXd;

/// Depth-1 linear model on the ratings grid with an additive bias matrix:
/// predictions are W + B. The spectral penalty applies to the single weight
/// matrix W only.
struct LnnBiasConfig {
  opt::OptimizerSpec optimizer;   // adam, lr 5e-4 by default
  penalty::PenaltySpec penalty;   // ratio with lambda 1.5 by default
  long max_iters = 20000;
  double init_std = 1e-3;
  std::uint64_t seed = 0;
  long eval_every = 200;

  static LnnBiasConfig defaults();
};

struct LnnBiasResult {
  MatrixXd weight;
  MatrixXd bias;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  long iters = 0;
};

/// Full-batch training on the observed ratings; reports test RMSE on the
/// held-out triples. progress(iter, train_rmse, test_rmse) is optional.
LnnBiasResult train_lnn_bias(const data::MaskedMatrix& train,
                             const std::vector<data::Rating>& test, const LnnBiasConfig& cfg,
                             const std::function<void(long, double, double)>& progress = {});

/// Classic user-item embedding model trained with minibatches; the ratio
/// penalty applies to the user and/or item embedding matrices.
struct EmbeddingConfig {
  opt::OptimizerSpec optimizer;  // adam, lr 1e-3 by default
  int embed_dim = 64;
  int batch_size = 256;
  int epochs = 100;
  double lambda_user = 0.01;
  double lambda_item = 0.0;
  double init_std = 1e-2;
  std::uint64_t seed = 0;
  int patience = 3;  // stop once train error rises this many epochs in a row

  static EmbeddingConfig defaults();
};

struct EmbeddingResult {
  model::EmbeddingModel model;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  int epochs_run = 0;
};

EmbeddingResult train_embedding(const data::RatingsDataset& trainset,
                                const std::vector<data::Rating>& test,
                                const EmbeddingConfig& cfg,
                                const std::function<void(int, double, double)>& progress = {});

}  // namespace lowrank::mlens
