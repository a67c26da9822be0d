#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lowrank/errors.hpp"

namespace lowrank::model {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Deep linear network: layers[0] = W_1 is applied first, layers[N-1] = W_N
/// last, so the end product is W = W_N * ... * W_1 with W_i of shape
/// d_i x d_{i-1}.
struct DeepLinearNet {
  std::vector<MatrixXd> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  /// Dimension chain d_0, d_1, ..., d_N.
  std::vector<Index> dims() const;
  /// Throws InvalidInputError if adjacent shapes do not chain.
  void validate() const;
};

/// Every entry i.i.d. N(0, std^2) from a generator seeded with `seed`;
/// bit-reproducible for a fixed seed. dims has length depth+1.
DeepLinearNet init_gaussian(const std::vector<Index>& dims, double std, std::uint64_t seed);

/// Right-to-left product of the layers; W_1 itself at depth 1.
MatrixXd end_product(const DeepLinearNet& net);

/// dL/dW_j = (W_N...W_{j+1})^T * grad_w * (W_{j-1}...W_1)^T for every layer;
/// empty products are identities.
std::vector<MatrixXd> layer_gradients(const DeepLinearNet& net,
                                      const Eigen::Ref<const MatrixXd>& grad_w);

/// Binary checkpoint: header (magic, depth, dims, seed) then the layers as
/// row-major 64-bit floats.
void save_checkpoint(const std::string& path, const DeepLinearNet& net, std::uint64_t seed);
DeepLinearNet load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr);

/// User-item model: rating(u, i) = global_bias + user_bias[u] + item_bias[i]
/// + <user_embed.row(u), item_embed.row(i)>.
struct EmbeddingModel {
  MatrixXd user_embed;  // n_users x k
  MatrixXd item_embed;  // n_items x k
  VectorXd user_bias;
  VectorXd item_bias;
  double global_bias = 0.0;

  static EmbeddingModel zeros(Index n_users, Index n_items, Index k);
  static EmbeddingModel random(Index n_users, Index n_items, Index k, double std,
                               std::uint64_t seed);
};

VectorXd predict_ratings(const EmbeddingModel& model,
                         const std::vector<std::pair<int, int>>& pairs);

/// Squared-error loss gradients of sum_b (pred_b - rating_b)^2 over a batch,
/// plus optional ratio penalties lambda_user * R(user_embed) and
/// lambda_item * R(item_embed).
struct EmbeddingGradients {
  MatrixXd user_embed;
  MatrixXd item_embed;
  VectorXd user_bias;
  VectorXd item_bias;
  double global_bias = 0.0;
  double loss = 0.0;  // data term plus penalty terms
};

struct RatingTriple {
  int user = 0;
  int item = 0;
  double rating = 0.0;
};

EmbeddingGradients embedding_gradients(const EmbeddingModel& model,
                                       const std::vector<RatingTriple>& batch,
                                       double lambda_user, double lambda_item);

}  // namespace lowrank::model
