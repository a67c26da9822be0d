#include "lowrank/movielens.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "lowrank/rng.hpp"
#include "lowrank/spectral.hpp"

namespace lowrank::mlens {

LnnBiasConfig LnnBiasConfig::defaults() {
  LnnBiasConfig cfg;
  cfg.optimizer = opt::OptimizerSpec::defaults(opt::OptKind::Adam);
  cfg.optimizer.lr = 5e-4;
  cfg.penalty = penalty::PenaltySpec::ratio(1.5);
  return cfg;
}

LnnBiasResult train_lnn_bias(const data::MaskedMatrix& train,
                             const std::vector<data::Rating>& test, const LnnBiasConfig& cfg,
                             const std::function<void(long, double, double)>& progress) {
  train.validate();
  cfg.optimizer.validate();
  cfg.penalty.validate();

  Rng rng(cfg.seed);
  std::vector<MatrixXd> params(2);
  params[0] = MatrixXd(train.rows, train.cols);  // weight
  for (Eigen::Index i = 0; i < params[0].rows(); ++i)
    for (Eigen::Index j = 0; j < params[0].cols(); ++j)
      params[0](i, j) = cfg.init_std * rng.normal();
  params[1] = MatrixXd::Zero(train.rows, train.cols);  // bias

  opt::OptimizerState state;
  spectral::SvdComputer svd_engine;
  const double n_obs = static_cast<double>(train.sample_size());
  LnnBiasResult out;
  for (long iter = 0; iter < cfg.max_iters; ++iter) {
    MatrixXd grad = MatrixXd::Zero(train.rows, train.cols);
    double loss = 0.0;
    for (size_t t = 0; t < train.obs_row.size(); ++t) {
      const int i = train.obs_row[t];
      const int j = train.obs_col[t];
      const double r = params[0](i, j) + params[1](i, j) - train.obs_val(static_cast<Eigen::Index>(t));
      loss += r * r;
      grad(i, j) = 2.0 * r;
    }
    out.train_rmse = std::sqrt(loss / n_obs);
    if (progress && (iter % cfg.eval_every == 0)) {
      const double test_rmse =
          test.empty() ? std::numeric_limits<double>::quiet_NaN()
                       : data::rmse(params[0] + params[1], test);
      progress(iter, out.train_rmse, test_rmse);
    }

    std::vector<MatrixXd> grads(2);
    grads[1] = grad;  // bias sees only the data term
    if (cfg.penalty.active()) {
      const auto svd = svd_engine.compute(params[0]);
      grad += cfg.penalty.lambda * penalty::penalty_gradient(cfg.penalty, svd).gradient;
    }
    grads[0] = std::move(grad);
    opt::step(cfg.optimizer, state, params, grads);
    out.iters = iter + 1;
  }
  out.weight = std::move(params[0]);
  out.bias = std::move(params[1]);
  if (!test.empty()) out.test_rmse = data::rmse(out.weight + out.bias, test);
  return out;
}

EmbeddingConfig EmbeddingConfig::defaults() {
  EmbeddingConfig cfg;
  cfg.optimizer = opt::OptimizerSpec::defaults(opt::OptKind::Adam);
  return cfg;
}

EmbeddingResult train_embedding(const data::RatingsDataset& trainset,
                                const std::vector<data::Rating>& test,
                                const EmbeddingConfig& cfg,
                                const std::function<void(int, double, double)>& progress) {
  cfg.optimizer.validate();
  const int n_users = trainset.n_users + 1;
  const int n_items = trainset.n_items + 1;
  auto m = model::EmbeddingModel::random(n_users, n_items, cfg.embed_dim, cfg.init_std, cfg.seed);

  // Parameter group order: user_embed, item_embed, user_bias, item_bias, global.
  std::vector<MatrixXd> params(5);
  params[0] = m.user_embed;
  params[1] = m.item_embed;
  params[2] = m.user_bias;
  params[3] = m.item_bias;
  params[4] = MatrixXd::Constant(1, 1, m.global_bias);
  opt::OptimizerState state;
  Rng rng(cfg.seed + 0x9e3779b97f4a7c15ULL);

  auto assemble = [&]() {
    m.user_embed = params[0];
    m.item_embed = params[1];
    m.user_bias = params[2];
    m.item_bias = params[3];
    m.global_bias = params[4](0, 0);
  };
  auto eval_rmse = [&](const std::vector<data::Rating>& set) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (const auto& r : set) {
      const double pred = m.global_bias + m.user_bias(r.user) + m.item_bias(r.item) +
                          m.user_embed.row(r.user).dot(m.item_embed.row(r.item));
      sum += (pred - r.value) * (pred - r.value);
    }
    return std::sqrt(sum / static_cast<double>(set.size()));
  };

  std::vector<size_t> order(trainset.triples.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::vector<model::RatingTriple> batch;

  EmbeddingResult out;
  double best_train = std::numeric_limits<double>::infinity();
  int rising = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (size_t i = 0; i + 1 < order.size(); ++i) {
      const size_t j = i + static_cast<size_t>(rng.uniform_below(order.size() - i));
      std::swap(order[i], order[j]);
    }
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      batch.clear();
      for (size_t t = start; t < stop; ++t) {
        const auto& r = trainset.triples[order[t]];
        batch.push_back({r.user, r.item, r.value});
      }
      assemble();
      const auto g = model::embedding_gradients(m, batch, cfg.lambda_user, cfg.lambda_item);
      std::vector<MatrixXd> grads(5);
      grads[0] = g.user_embed;
      grads[1] = g.item_embed;
      grads[2] = g.user_bias;
      grads[3] = g.item_bias;
      grads[4] = MatrixXd::Constant(1, 1, g.global_bias);
      opt::step(cfg.optimizer, state, params, grads);
    }
    assemble();
    out.train_rmse = [&] {
      double sum = 0.0;
      for (const auto& r : trainset.triples) {
        const double pred = m.global_bias + m.user_bias(r.user) + m.item_bias(r.item) +
                            m.user_embed.row(r.user).dot(m.item_embed.row(r.item));
        sum += (pred - r.value) * (pred - r.value);
      }
      return std::sqrt(sum / static_cast<double>(trainset.triples.size()));
    }();
    out.test_rmse = eval_rmse(test);
    out.epochs_run = epoch + 1;
    if (progress) progress(epoch, out.train_rmse, out.test_rmse);
    if (out.train_rmse > best_train) {
      if (++rising >= cfg.patience) break;
    } else {
      best_train = out.train_rmse;
      rising = 0;
    }
  }
  out.model = std::move(m);
  return out;
}

}  // namespace lowrank::mlens
