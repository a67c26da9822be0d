#include "lowrank/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "lowrank/rng.hpp"

namespace lowrank::data {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void SyntheticSpec::validate() const {
  if (m < 1 || n < 1) throw InvalidConfigError("synthetic: bad shape");
  if (rank < 1 || rank > std::min(m, n))
    throw InvalidConfigError("synthetic: rank must lie in [1, min(m, n)]");
  if (sample_size < 1 || sample_size > static_cast<long>(m) * n)
    throw InvalidConfigError("synthetic: sample_size must lie in [1, m*n]");
}

MaskedMatrix generate_low_rank(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  MatrixXd u(spec.m, spec.rank);
  MatrixXd v(spec.n, spec.rank);
  for (Index i = 0; i < u.rows(); ++i)
    for (Index j = 0; j < u.cols(); ++j) u(i, j) = rng.normal();
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j) v(i, j) = rng.normal();
  MatrixXd truth = u * v.transpose();

  // Uniform sample of distinct cells via a partial Fisher-Yates shuffle.
  const long total = static_cast<long>(spec.m) * spec.n;
  std::vector<long> cells(static_cast<size_t>(total));
  std::iota(cells.begin(), cells.end(), 0L);
  for (long i = 0; i < spec.sample_size; ++i) {
    const long j = i + static_cast<long>(rng.uniform_below(static_cast<std::uint64_t>(total - i)));
    std::swap(cells[static_cast<size_t>(i)], cells[static_cast<size_t>(j)]);
  }

  MaskedMatrix out;
  out.rows = spec.m;
  out.cols = spec.n;
  out.obs_row.resize(static_cast<size_t>(spec.sample_size));
  out.obs_col.resize(static_cast<size_t>(spec.sample_size));
  out.obs_val = VectorXd(spec.sample_size);
  for (long t = 0; t < spec.sample_size; ++t) {
    const long cell = cells[static_cast<size_t>(t)];
    const int i = static_cast<int>(cell / spec.n);
    const int j = static_cast<int>(cell % spec.n);
    out.obs_row[static_cast<size_t>(t)] = i;
    out.obs_col[static_cast<size_t>(t)] = j;
    out.obs_val(t) = truth(i, j);
  }
  out.ground_truth = std::move(truth);
  out.validate();
  return out;
}

RatingsDataset load_ratings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("ratings: cannot open '" + path + "'");
  RatingsDataset ds;
  std::string line;
  long lineno = 0;
  std::unordered_set<long long> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    Rating r;
    long rating_raw = 0;
    if (!(ss >> r.user >> r.item >> rating_raw >> r.timestamp))
      throw ParseError("ratings: malformed line in '" + path + "'", lineno);
    if (r.user < 1 || r.item < 1)
      throw ParseError("ratings: ids must be >= 1", lineno);
    if (rating_raw < 1 || rating_raw > 5)
      throw ParseError("ratings: rating outside 1..5", lineno);
    if (!seen.insert((static_cast<long long>(r.user) << 32) | r.item).second)
      throw ParseError("ratings: duplicate (user, item) pair", lineno);
    r.value = static_cast<double>(rating_raw);
    ds.n_users = std::max(ds.n_users, r.user);
    ds.n_items = std::max(ds.n_items, r.item);
    ds.triples.push_back(r);
  }
  if (ds.triples.empty()) throw ParseError("ratings: no triples in '" + path + "'", lineno);
  return ds;
}

std::pair<MaskedMatrix, std::vector<Rating>> split_ratings(const RatingsDataset& ds,
                                                           double split_fraction,
                                                           std::uint64_t seed) {
  if (split_fraction < 0.0 || split_fraction > 1.0)
    throw InvalidConfigError("split: fraction must lie in [0, 1]");
  const size_t total = ds.triples.size();
  const size_t n_train =
      static_cast<size_t>(std::llround(split_fraction * static_cast<double>(total)));
  std::vector<size_t> order(total);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  for (size_t i = 0; i + 1 < total; ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_below(total - i));
    std::swap(order[i], order[j]);
  }

  MaskedMatrix train;
  train.rows = ds.n_users + 1;  // 1-based ids with padded row/column 0
  train.cols = ds.n_items + 1;
  train.obs_row.reserve(n_train);
  train.obs_col.reserve(n_train);
  train.obs_val = VectorXd(static_cast<Index>(n_train));
  for (size_t t = 0; t < n_train; ++t) {
    const Rating& r = ds.triples[order[t]];
    train.obs_row.push_back(r.user);
    train.obs_col.push_back(r.item);
    train.obs_val(static_cast<Index>(t)) = r.value;
  }
  std::vector<Rating> test;
  test.reserve(total - n_train);
  for (size_t t = n_train; t < total; ++t) test.push_back(ds.triples[order[t]]);
  train.validate();
  return {std::move(train), std::move(test)};
}

std::pair<MaskedMatrix, std::vector<Rating>> load_movielens(const std::string& path,
                                                            double split_fraction,
                                                            std::uint64_t seed) {
  return split_ratings(load_ratings_file(path), split_fraction, seed);
}

double rmse(const Eigen::Ref<const MatrixXd>& w, const std::vector<Rating>& test) {
  if (test.empty()) throw UnsupportedError("rmse: empty test set");
  double sum = 0.0;
  for (const auto& r : test) {
    if (r.user < 0 || r.user >= w.rows() || r.item < 0 || r.item >= w.cols())
      throw InvalidInputError("rmse: rating index outside the matrix");
    const double d = w(r.user, r.item) - r.value;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(test.size()));
}

void save_masked_csv(const std::string& path, const MaskedMatrix& data, int rank,
                     std::uint64_t seed) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw IoError("masked csv: cannot open '" + path + "'");
  out << "row,col,value\n";
  char buf[64];
  for (size_t t = 0; t < data.obs_row.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%.17g", data.obs_val(static_cast<Index>(t)));
    out << data.obs_row[t] << ',' << data.obs_col[t] << ',' << buf << "\n";
  }
  std::ofstream meta(path + ".meta");
  if (!meta) throw IoError("masked csv: cannot open '" + path + ".meta'");
  meta << "rows = " << data.rows << "\n"
       << "cols = " << data.cols << "\n"
       << "rank = " << rank << "\n"
       << "seed = " << seed << "\n"
       << "sample_size = " << data.sample_size() << "\n";
}

MaskedMatrix load_masked_csv(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw IoError("masked csv: cannot open '" + path + ".meta'");
  MaskedMatrix out;
  std::string line;
  while (std::getline(meta, line)) {
    std::stringstream ss(line);
    std::string key, eq;
    long value = 0;
    if (!(ss >> key >> eq >> value)) continue;
    if (key == "rows") out.rows = value;
    if (key == "cols") out.cols = value;
  }
  if (out.rows < 1 || out.cols < 1) throw IoError("masked csv: missing shape in meta");

  std::ifstream in(path);
  if (!in) throw IoError("masked csv: cannot open '" + path + "'");
  long lineno = 0;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;  // header
    std::stringstream ss(line);
    std::string f1, f2, f3;
    if (!std::getline(ss, f1, ',') || !std::getline(ss, f2, ',') || !std::getline(ss, f3, ','))
      throw ParseError("masked csv: malformed line", lineno);
    try {
      out.obs_row.push_back(std::stoi(f1));
      out.obs_col.push_back(std::stoi(f2));
      vals.push_back(std::stod(f3));
    } catch (const std::exception&) {
      throw ParseError("masked csv: bad number", lineno);
    }
  }
  out.obs_val = Eigen::Map<const VectorXd>(vals.data(), static_cast<Index>(vals.size()));
  out.validate();
  return out;
}

}  // namespace lowrank::data
