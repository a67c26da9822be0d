#include "lowrank/completion.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "lowrank/spectral.hpp"

namespace lowrank::engine {

void MaskedMatrix::validate() const {
  if (rows < 1 || cols < 1) throw InvalidInputError("masked: empty shape");
  if (obs_row.size() != obs_col.size() ||
      static_cast<Index>(obs_row.size()) != obs_val.size())
    throw InvalidInputError("masked: observation arrays disagree in length");
  if (sample_size() > rows * cols)
    throw InvalidInputError("masked: more observations than cells");
  std::unordered_set<long long> seen;
  seen.reserve(obs_row.size() * 2);
  for (size_t t = 0; t < obs_row.size(); ++t) {
    const int i = obs_row[t];
    const int j = obs_col[t];
    if (i < 0 || i >= rows || j < 0 || j >= cols)
      throw InvalidInputError("masked: index out of range");
    if (!seen.insert(static_cast<long long>(i) * cols + j).second)
      throw InvalidInputError("masked: duplicate index");
  }
  if (ground_truth &&
      (ground_truth->rows() != rows || ground_truth->cols() != cols))
    throw InvalidInputError("masked: ground truth shape mismatch");
}

double masked_loss(const Eigen::Ref<const MatrixXd>& w, const MaskedMatrix& data) {
  if (w.rows() != data.rows || w.cols() != data.cols)
    throw InvalidInputError("masked_loss: shape mismatch");
  double loss = 0.0;
  for (size_t t = 0; t < data.obs_row.size(); ++t) {
    const double r = w(data.obs_row[t], data.obs_col[t]) - data.obs_val(static_cast<Index>(t));
    loss += r * r;
  }
  return loss;
}

MatrixXd masked_loss_gradient(const Eigen::Ref<const MatrixXd>& w, const MaskedMatrix& data) {
  if (w.rows() != data.rows || w.cols() != data.cols)
    throw InvalidInputError("masked_loss_gradient: shape mismatch");
  MatrixXd g = MatrixXd::Zero(w.rows(), w.cols());
  for (size_t t = 0; t < data.obs_row.size(); ++t) {
    const int i = data.obs_row[t];
    const int j = data.obs_col[t];
    g(i, j) = 2.0 * (w(i, j) - data.obs_val(static_cast<Index>(t)));
  }
  return g;
}

double test_error(const Eigen::Ref<const MatrixXd>& w, const MaskedMatrix& data) {
  if (!data.ground_truth)
    throw UnsupportedError("test_error: no ground truth attached");
  if (w.rows() != data.rows || w.cols() != data.cols)
    throw InvalidInputError("test_error: shape mismatch");
  const Index total = data.rows * data.cols;
  const Index unobserved = total - data.sample_size();
  if (unobserved == 0)
    throw UnsupportedError("test_error: every entry observed, empty test set");
  const MatrixXd& gt = *data.ground_truth;
  double sum = (w - gt).squaredNorm();
  for (size_t t = 0; t < data.obs_row.size(); ++t) {
    const double r = w(data.obs_row[t], data.obs_col[t]) - gt(data.obs_row[t], data.obs_col[t]);
    sum -= r * r;
  }
  return std::max(sum, 0.0) / static_cast<double>(unobserved);
}

void TrainConfig::validate() const {
  if (max_iters < 1) throw InvalidConfigError("train: max_iters must be >= 1");
  if (!(loss_floor > 0.0)) throw InvalidConfigError("train: loss_floor must be positive");
  if (snapshot_every < 1) throw InvalidConfigError("train: snapshot_every must be >= 1");
  if (top_sv < 1) throw InvalidConfigError("train: top_sv must be >= 1");
  penalty.validate();
  optimizer.validate();
}

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::LossFloor: return "loss_floor";
    case StopReason::MaxIters: return "max_iters";
    case StopReason::Diverged: return "diverged";
  }
  return "max_iters";
}

StopReason parse_stop_reason(const std::string& name) {
  if (name == "loss_floor") return StopReason::LossFloor;
  if (name == "max_iters") return StopReason::MaxIters;
  if (name == "diverged") return StopReason::Diverged;
  throw InvalidConfigError("unknown stop reason '" + name + "'");
}

bool snapshot_due(long iter, long every) {
  if (iter % every == 0) return true;
  if (iter >= every) return false;
  long lead = iter;
  while (lead >= 10 && lead % 10 == 0) lead /= 10;
  return lead == 1 || lead == 2 || lead == 5;
}

namespace {

TrajectorySnapshot make_snapshot(long iter, double loss, const Eigen::Ref<const MatrixXd>& w,
                                 const VectorXd& sigma, const MaskedMatrix& data, int top_sv) {
  TrajectorySnapshot s;
  s.iter = iter;
  s.train_loss = loss;
  const bool testable =
      data.ground_truth.has_value() && data.sample_size() < data.rows * data.cols;
  s.test_error = testable ? test_error(w, data) : std::numeric_limits<double>::quiet_NaN();
  s.effective_rank = spectral::effective_rank(sigma);
  const Index k = std::min<Index>(top_sv, sigma.size());
  s.top_singular_values = sigma.head(k);
  return s;
}

}  // namespace

TrainResult train(model::DeepLinearNet net, const MaskedMatrix& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  net.validate();
  {
    const auto dims = net.dims();
    if (dims.back() != data.rows || dims.front() != data.cols)
      throw InvalidInputError("train: net output shape does not match the data");
  }

  TrainResult result;
  result.snapshots.reserve(64);
  opt::OptimizerState state;
  spectral::SvdComputer svd_engine;
  const bool penalized = cfg.penalty.active();

  long iter = 0;
  while (true) {
    const MatrixXd w = end_product(net);
    const double loss = masked_loss(w, data);

    StopReason stop = StopReason::MaxIters;
    bool stopping = false;
    if (!std::isfinite(loss) || loss > cfg.divergence_cap) {
      stop = StopReason::Diverged;
      stopping = true;
    } else if (loss < cfg.loss_floor) {
      stop = StopReason::LossFloor;
      stopping = true;
    } else if (iter >= cfg.max_iters) {
      stop = StopReason::MaxIters;
      stopping = true;
    }

    const bool want_snapshot = stopping || snapshot_due(iter, cfg.snapshot_every);
    spectral::Svd svd;
    const bool need_svd = (penalized && !stopping) || want_snapshot;
    if (need_svd) {
      if (stop == StopReason::Diverged && !w.allFinite()) {
        // Spectrum is meaningless; record NaNs instead of failing the run.
        svd.sigma = VectorXd::Constant(std::min(w.rows(), w.cols()),
                                       std::numeric_limits<double>::quiet_NaN());
      } else {
        svd = svd_engine.compute(w);
      }
    }
    if (want_snapshot) {
      if (svd.sigma.allFinite()) {
        result.snapshots.push_back(make_snapshot(iter, loss, w, svd.sigma, data, cfg.top_sv));
      } else {
        TrajectorySnapshot s;
        s.iter = iter;
        s.train_loss = loss;
        s.test_error = std::numeric_limits<double>::quiet_NaN();
        s.effective_rank = std::numeric_limits<double>::quiet_NaN();
        s.top_singular_values =
            VectorXd::Constant(cfg.top_sv, std::numeric_limits<double>::quiet_NaN());
        result.snapshots.push_back(std::move(s));
      }
    }
    if (stopping) {
      result.stop_reason = stop;
      result.final_iter = iter;
      break;
    }

    MatrixXd grad_w = masked_loss_gradient(w, data);
    if (penalized) {
      const auto pe = penalty::penalty_gradient(cfg.penalty, svd);
      grad_w += cfg.penalty.lambda * pe.gradient;
    }
    auto grads = layer_gradients(net, grad_w);
    opt::step(cfg.optimizer, state, net.layers, grads);
    ++iter;
  }

  result.net = std::move(net);
  return result;
}

void write_snapshots_csv(const std::string& path,
                         const std::vector<TrajectorySnapshot>& snaps) {
  std::ofstream out(path);
  if (!out) throw IoError("snapshots: cannot open '" + path + "' for writing");
  const Index k = snaps.empty() ? 0 : snaps.front().top_singular_values.size();
  out << "iter,train_loss,test_error,effective_rank";
  for (Index i = 1; i <= k; ++i) out << ",sv_" << i;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (const auto& s : snaps) {
    out << s.iter;
    put(s.train_loss);
    put(s.test_error);
    put(s.effective_rank);
    for (Index i = 0; i < s.top_singular_values.size(); ++i) put(s.top_singular_values(i));
    out << "\n";
  }
  if (!out) throw IoError("snapshots: write failed for '" + path + "'");
}

std::vector<TrajectorySnapshot> read_snapshots_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("snapshots: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("snapshots: missing header", 1);
  std::vector<TrajectorySnapshot> snaps;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<double> vals;
    while (std::getline(ss, field, ',')) {
      try {
        vals.push_back(std::stod(field));
      } catch (const std::exception&) {
        throw ParseError("snapshots: bad number '" + field + "'", lineno);
      }
    }
    if (vals.size() < 4) throw ParseError("snapshots: too few columns", lineno);
    TrajectorySnapshot s;
    s.iter = static_cast<long>(vals[0]);
    s.train_loss = vals[1];
    s.test_error = vals[2];
    s.effective_rank = vals[3];
    s.top_singular_values = VectorXd(static_cast<Index>(vals.size() - 4));
    for (size_t i = 4; i < vals.size(); ++i)
      s.top_singular_values(static_cast<Index>(i - 4)) = vals[i];
    snaps.push_back(std::move(s));
  }
  return snaps;
}

}  // namespace lowrank::engine
