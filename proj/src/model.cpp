#include "lowrank/model.hpp"

#include <cstring>
#include <fstream>

#include "lowrank/penalty.hpp"
#include "lowrank/rng.hpp"
#include "lowrank/spectral.hpp"

namespace lowrank::model {

std::vector<Index> DeepLinearNet::dims() const {
  std::vector<Index> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().cols());
  for (const auto& w : layers) d.push_back(w.rows());
  return d;
}

void DeepLinearNet::validate() const {
  if (layers.empty()) throw InvalidInputError("net: no layers");
  for (size_t i = 0; i + 1 < layers.size(); ++i)
    if (layers[i + 1].cols() != layers[i].rows())
      throw InvalidInputError("net: adjacent layer dimensions do not chain");
}

DeepLinearNet init_gaussian(const std::vector<Index>& dims, double std, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidConfigError("init_gaussian: dims needs at least d_0, d_1");
  for (Index d : dims)
    if (d < 1) throw InvalidConfigError("init_gaussian: dimensions must be positive");
  if (!(std > 0.0)) throw InvalidConfigError("init_gaussian: std must be positive");
  Rng rng(seed);
  DeepLinearNet net;
  net.layers.reserve(dims.size() - 1);
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    MatrixXd w(dims[i + 1], dims[i]);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) w(r, c) = std * rng.normal();
    net.layers.push_back(std::move(w));
  }
  return net;
}

MatrixXd end_product(const DeepLinearNet& net) {
  net.validate();
  MatrixXd w = net.layers.front();
  for (size_t i = 1; i < net.layers.size(); ++i) w = net.layers[i] * w;
  return w;
}

std::vector<MatrixXd> layer_gradients(const DeepLinearNet& net,
                                      const Eigen::Ref<const MatrixXd>& grad_w) {
  net.validate();
  const int n = net.depth();
  const auto dims = net.dims();
  if (grad_w.rows() != dims.back() || grad_w.cols() != dims.front())
    throw InvalidInputError("layer_gradients: grad shape does not match the end product");

  // above[j] = product of layers strictly above j, below[j] = strictly below;
  // empty products are identities (realized as absent factors below).
  std::vector<MatrixXd> above(static_cast<size_t>(n));
  std::vector<MatrixXd> below(static_cast<size_t>(n));
  for (int j = n - 2; j >= 0; --j) {
    const auto& upper = net.layers[static_cast<size_t>(j + 1)];
    above[static_cast<size_t>(j)] =
        (j == n - 2) ? upper : above[static_cast<size_t>(j + 1)] * upper;
  }
  for (int j = 1; j < n; ++j) {
    const auto& lower = net.layers[static_cast<size_t>(j - 1)];
    below[static_cast<size_t>(j)] =
        (j == 1) ? lower : lower * below[static_cast<size_t>(j - 1)];
  }

  std::vector<MatrixXd> grads(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    MatrixXd g = grad_w;
    if (j + 1 < n) g = above[static_cast<size_t>(j)].transpose() * g;
    if (j > 0) g = g * below[static_cast<size_t>(j)].transpose();
    grads[static_cast<size_t>(j)] = std::move(g);
  }
  return grads;
}

namespace {
constexpr char kCheckpointMagic[8] = {'D', 'L', 'N', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::string& path, const DeepLinearNet& net, std::uint64_t seed) {
  net.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::int64_t depth = net.depth();
  out.write(reinterpret_cast<const char*>(&depth), sizeof(depth));
  const auto dims = net.dims();
  for (Index d : dims) {
    const std::int64_t v = d;
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  out.write(reinterpret_cast<const char*>(&seed), sizeof(seed));
  for (const auto& w : net.layers)
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) {
        const double v = w(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
  if (!out) throw IoError("checkpoint: write failed for '" + path + "'");
}

DeepLinearNet load_checkpoint(const std::string& path, std::uint64_t* seed_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw IoError("checkpoint: bad magic in '" + path + "'");
  std::int64_t depth = 0;
  in.read(reinterpret_cast<char*>(&depth), sizeof(depth));
  if (!in || depth < 1 || depth > 1024) throw IoError("checkpoint: bad depth");
  std::vector<Index> dims(static_cast<size_t>(depth + 1));
  for (auto& d : dims) {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in || v < 1) throw IoError("checkpoint: bad dimension");
    d = static_cast<Index>(v);
  }
  std::uint64_t seed = 0;
  in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  if (seed_out != nullptr) *seed_out = seed;
  DeepLinearNet net;
  for (std::int64_t j = 0; j < depth; ++j) {
    MatrixXd w(dims[static_cast<size_t>(j + 1)], dims[static_cast<size_t>(j)]);
    for (Index r = 0; r < w.rows(); ++r)
      for (Index c = 0; c < w.cols(); ++c) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        w(r, c) = v;
      }
    net.layers.push_back(std::move(w));
  }
  if (!in) throw IoError("checkpoint: truncated file '" + path + "'");
  return net;
}

EmbeddingModel EmbeddingModel::zeros(Index n_users, Index n_items, Index k) {
  EmbeddingModel m;
  m.user_embed = MatrixXd::Zero(n_users, k);
  m.item_embed = MatrixXd::Zero(n_items, k);
  m.user_bias = VectorXd::Zero(n_users);
  m.item_bias = VectorXd::Zero(n_items);
  return m;
}

EmbeddingModel EmbeddingModel::random(Index n_users, Index n_items, Index k, double std,
                                      std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingModel m = zeros(n_users, n_items, k);
  for (Index r = 0; r < n_users; ++r)
    for (Index c = 0; c < k; ++c) m.user_embed(r, c) = std * rng.normal();
  for (Index r = 0; r < n_items; ++r)
    for (Index c = 0; c < k; ++c) m.item_embed(r, c) = std * rng.normal();
  return m;
}

VectorXd predict_ratings(const EmbeddingModel& model,
                         const std::vector<std::pair<int, int>>& pairs) {
  VectorXd out(static_cast<Index>(pairs.size()));
  for (size_t b = 0; b < pairs.size(); ++b) {
    const auto [u, i] = pairs[b];
    if (u < 0 || u >= model.user_embed.rows() || i < 0 || i >= model.item_embed.rows())
      throw InvalidInputError("predict_ratings: index out of range");
    out(static_cast<Index>(b)) = model.global_bias + model.user_bias(u) + model.item_bias(i) +
                                 model.user_embed.row(u).dot(model.item_embed.row(i));
  }
  return out;
}

EmbeddingGradients embedding_gradients(const EmbeddingModel& model,
                                       const std::vector<RatingTriple>& batch,
                                       double lambda_user, double lambda_item) {
  EmbeddingGradients g;
  g.user_embed = MatrixXd::Zero(model.user_embed.rows(), model.user_embed.cols());
  g.item_embed = MatrixXd::Zero(model.item_embed.rows(), model.item_embed.cols());
  g.user_bias = VectorXd::Zero(model.user_bias.size());
  g.item_bias = VectorXd::Zero(model.item_bias.size());
  for (const auto& t : batch) {
    if (t.user < 0 || t.user >= model.user_embed.rows() || t.item < 0 ||
        t.item >= model.item_embed.rows())
      throw InvalidInputError("embedding_gradients: index out of range");
    const double pred = model.global_bias + model.user_bias(t.user) + model.item_bias(t.item) +
                        model.user_embed.row(t.user).dot(model.item_embed.row(t.item));
    const double r = 2.0 * (pred - t.rating);
    g.loss += (pred - t.rating) * (pred - t.rating);
    g.global_bias += r;
    g.user_bias(t.user) += r;
    g.item_bias(t.item) += r;
    g.user_embed.row(t.user) += r * model.item_embed.row(t.item);
    g.item_embed.row(t.item) += r * model.user_embed.row(t.user);
  }
  const auto ratio = penalty::PenaltySpec::ratio(1.0);
  if (lambda_user != 0.0) {
    const auto svd = spectral::svd(model.user_embed);
    const auto pe = penalty::penalty_gradient(ratio, svd);
    g.user_embed += lambda_user * pe.gradient;
    g.loss += lambda_user * pe.value;
  }
  if (lambda_item != 0.0) {
    const auto svd = spectral::svd(model.item_embed);
    const auto pe = penalty::penalty_gradient(ratio, svd);
    g.item_embed += lambda_item * pe.gradient;
    g.loss += lambda_item * pe.value;
  }
  return g;
}

}  // namespace lowrank::model
