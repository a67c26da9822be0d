#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/completion.hpp"

namespace lowrank::data {

using Eigen::Index;
using engine::MaskedMatrix;

/// Random rank-r ground truth U V^T (standard normal factors) with a uniform
/// sample of distinct observed cells.
struct SyntheticSpec {
  Index m = 100;
  Index n = 100;
  int rank = 5;
  long sample_size = 2000;
  std::uint64_t seed = 0;

  void validate() const;
};

MaskedMatrix generate_low_rank(const SyntheticSpec& spec);

/// One explicit rating with its original 1-based ids retained.
struct Rating {
  int user = 0;
  int item = 0;
  double value = 0.0;
  long timestamp = 0;
};

struct RatingsDataset {
  std::vector<Rating> triples;
  int n_users = 0;  // largest user id seen
  int n_items = 0;  // largest item id seen
};

/// Parses the MovieLens100K `u.data` layout: tab-separated
/// user, item, rating, timestamp with 1-based ids and integer ratings 1..5.
RatingsDataset load_ratings_file(const std::string& path);

/// Global-uniform split: round(split_fraction * N) triples become training
/// observations on a (n_users+1) x (n_items+1) grid (row/column 0 padded so
/// 1-based ids index directly); the rest are returned for RMSE evaluation.
std::pair<MaskedMatrix, std::vector<Rating>> split_ratings(const RatingsDataset& ds,
                                                           double split_fraction,
                                                           std::uint64_t seed);

std::pair<MaskedMatrix, std::vector<Rating>> load_movielens(const std::string& path,
                                                            double split_fraction,
                                                            std::uint64_t seed);

/// sqrt(mean squared residual) of predictions w[user, item] on the test triples.
double rmse(const Eigen::Ref<const Eigen::MatrixXd>& w, const std::vector<Rating>& test);

/// Export/import of synthetic observations: `<path>` holds row,col,value
/// lines and `<path>.meta` the shape, rank, seed, and sample size. Ground
/// truth is not serialized; regenerate it from the recorded seed.
void save_masked_csv(const std::string& path, const MaskedMatrix& data, int rank,
                     std::uint64_t seed);
MaskedMatrix load_masked_csv(const std::string& path);

}  // namespace lowrank::data
