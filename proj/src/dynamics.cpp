#include "lowrank/dynamics.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "lowrank/spectral.hpp"

namespace lowrank::dynamics {

namespace {

constexpr Index kDenseCap = 2500;
constexpr double kDegenerateGapRel = 1e-6;

// (WW^T)^e and (W^TW)^e from a thin SVD; exponent zero means the identity
// (empty layer product), not the range projector.
MatrixXd left_gram_power(const spectral::Svd& svd, double e, Index m) {
  if (e == 0.0) return MatrixXd::Identity(m, m);
  VectorXd powered(svd.sigma.size());
  for (Index i = 0; i < svd.sigma.size(); ++i)
    powered(i) = svd.sigma(i) > 0.0 ? std::pow(svd.sigma(i), 2.0 * e) : 0.0;
  return svd.u * powered.asDiagonal() * svd.u.transpose();
}

MatrixXd right_gram_power(const spectral::Svd& svd, double e, Index n) {
  if (e == 0.0) return MatrixXd::Identity(n, n);
  VectorXd powered(svd.sigma.size());
  for (Index i = 0; i < svd.sigma.size(); ++i)
    powered(i) = svd.sigma(i) > 0.0 ? std::pow(svd.sigma(i), 2.0 * e) : 0.0;
  return svd.vt.transpose() * powered.asDiagonal() * svd.vt;
}

bool has_degenerate_spectrum(const VectorXd& sigma) {
  if (sigma.size() < 2) return false;
  const double top = sigma(0);
  for (Index i = 0; i + 1 < sigma.size(); ++i)
    if (sigma(i) - sigma(i + 1) < kDegenerateGapRel * top) return true;
  return false;
}

PreconditionerEval build_dense(const Eigen::Ref<const MatrixXd>& w, int depth,
                               const std::vector<MatrixXd>* s_factors) {
  if (depth < 1) throw InvalidInputError("preconditioner: depth must be >= 1");
  const Index m = w.rows();
  const Index n = w.cols();
  if (m * n > kDenseCap)
    throw UnsupportedError("preconditioner: dense build capped at m*n <= 2500");
  const auto svd = spectral::svd(w);
  PreconditionerEval out;
  out.depth = depth;
  out.p_matrix = MatrixXd::Zero(m * n, m * n);
  for (int j = 1; j <= depth; ++j) {
    const double e_left = static_cast<double>(depth - j) / depth;
    const double e_right = static_cast<double>(j - 1) / depth;
    MatrixXd term = spectral::kron(right_gram_power(svd, e_right, n),
                                   left_gram_power(svd, e_left, m));
    if (s_factors != nullptr) {
      const VectorXd diag = spectral::vec((*s_factors)[static_cast<size_t>(j - 1)]);
      term = term * diag.asDiagonal();
      out.g_diagonals.push_back(diag);
    }
    out.p_matrix += term;
  }
  return out;
}

}  // namespace

PreconditionerEval preconditioner_gd(const Eigen::Ref<const MatrixXd>& w, int depth) {
  return build_dense(w, depth, nullptr);
}

PreconditionerEval preconditioner_adam(const model::DeepLinearNet& net,
                                       const std::vector<MatrixXd>& grads,
                                       const std::vector<MatrixXd>& variances) {
  net.validate();
  const int depth = net.depth();
  if (grads.size() != static_cast<size_t>(depth) || variances.size() != grads.size())
    throw InvalidInputError("preconditioner_adam: need one gradient and variance per layer");
  std::vector<MatrixXd> s_factors;
  s_factors.reserve(grads.size());
  for (size_t j = 0; j < grads.size(); ++j) {
    if (grads[j].rows() != net.layers[j].rows() || grads[j].cols() != net.layers[j].cols())
      throw InvalidInputError("preconditioner_adam: gradient shape mismatch");
    if (variances[j].rows() != grads[j].rows() || variances[j].cols() != grads[j].cols())
      throw InvalidInputError("preconditioner_adam: variance shape mismatch");
    if (variances[j].minCoeff() < 0.0)
      throw InvalidInputError("preconditioner_adam: negative variance entries");
    s_factors.push_back(
        (grads[j].array().square() + variances[j].array()).rsqrt().matrix());
  }
  return build_dense(end_product(net), depth, &s_factors);
}

MatrixXd apply_preconditioner(const Eigen::Ref<const MatrixXd>& w, int depth,
                              const Eigen::Ref<const MatrixXd>& x,
                              const std::vector<MatrixXd>& s_factors) {
  if (x.rows() != w.rows() || x.cols() != w.cols())
    throw InvalidInputError("apply_preconditioner: shape mismatch");
  if (!s_factors.empty() && s_factors.size() != static_cast<size_t>(depth))
    throw InvalidInputError("apply_preconditioner: need one factor per layer");
  const auto svd = spectral::svd(w);
  MatrixXd acc = MatrixXd::Zero(w.rows(), w.cols());
  for (int j = 1; j <= depth; ++j) {
    const double e_left = static_cast<double>(depth - j) / depth;
    const double e_right = static_cast<double>(j - 1) / depth;
    MatrixXd term =
        s_factors.empty() ? MatrixXd(x) : s_factors[static_cast<size_t>(j - 1)].cwiseProduct(x);
    if (e_left != 0.0) term = left_gram_power(svd, e_left, w.rows()) * term;
    if (e_right != 0.0) term = term * right_gram_power(svd, e_right, w.cols());
    acc += term;
  }
  return acc;
}

const char* regime_name(Regime regime) {
  switch (regime) {
    case Regime::Gd: return "gd";
    case Regime::GdPenalty: return "gd_penalty";
    case Regime::Adam: return "adam";
    case Regime::AdamPenalty: return "adam_penalty";
  }
  return "gd";
}

VectorXd gd_sv_closed_form(const spectral::Svd& svd, int depth,
                           const Eigen::Ref<const MatrixXd>& grad) {
  const double n = static_cast<double>(depth);
  VectorXd out(svd.sigma.size());
  for (Index i = 0; i < svd.sigma.size(); ++i) {
    const double coupling = svd.u.col(i).dot(grad * svd.vt.row(i).transpose());
    const double s2 = svd.sigma(i) * svd.sigma(i);
    const double scale = depth == 1 ? 1.0 : n * std::pow(s2, (n - 1.0) / n);
    out(i) = -scale * coupling;
  }
  return out;
}

namespace {

VelocityPrediction finish_prediction(Regime regime, const spectral::Svd& svd,
                                     MatrixXd w_velocity) {
  VelocityPrediction out;
  out.regime = regime;
  out.degenerate_spectrum = has_degenerate_spectrum(svd.sigma);
  out.w_velocity = std::move(w_velocity);
  out.sv_velocities = VectorXd(svd.sigma.size());
  for (Index i = 0; i < svd.sigma.size(); ++i)
    out.sv_velocities(i) = svd.u.col(i).dot(out.w_velocity * svd.vt.row(i).transpose());
  return out;
}

}  // namespace

VelocityPrediction predict_velocity(Regime regime, const Eigen::Ref<const MatrixXd>& w,
                                    int depth, const Eigen::Ref<const MatrixXd>& loss_grad,
                                    const penalty::PenaltySpec& pen,
                                    const std::vector<MatrixXd>* adam_factors) {
  if (loss_grad.rows() != w.rows() || loss_grad.cols() != w.cols())
    throw InvalidInputError("predict_velocity: gradient shape mismatch");
  const auto svd = spectral::svd(w);
  if (svd.sigma(0) <= 0.0)
    throw DegenerateSpectrumError("predict_velocity: zero matrix");

  MatrixXd total = loss_grad;
  const bool penalized = regime == Regime::GdPenalty || regime == Regime::AdamPenalty;
  if (penalized && pen.active())
    total += pen.lambda * penalty::penalty_gradient(pen, svd).gradient;

  const bool adaptive = regime == Regime::Adam || regime == Regime::AdamPenalty;
  std::vector<MatrixXd> factors;
  if (adaptive) {
    if (adam_factors == nullptr)
      throw InvalidInputError("predict_velocity: adaptive regime needs per-layer factors");
    if (depth != 1)
      throw InvalidInputError(
          "predict_velocity: adaptive regimes above depth 1 need the full net "
          "(the per-layer factors do not commute through the gram powers)");
    factors = *adam_factors;
  }
  return finish_prediction(regime, svd, -apply_preconditioner(w, depth, total, factors));
}

VelocityPrediction predict_velocity(Regime regime, const model::DeepLinearNet& net,
                                    const Eigen::Ref<const MatrixXd>& loss_grad,
                                    const penalty::PenaltySpec& pen,
                                    const std::vector<MatrixXd>* adam_factors) {
  const MatrixXd w = end_product(net);
  const bool adaptive = regime == Regime::Adam || regime == Regime::AdamPenalty;
  if (!adaptive || net.depth() == 1)
    return predict_velocity(regime, w, net.depth(), loss_grad, pen, adam_factors);

  // Adaptive flow with the per-layer diagonal factors applied where they
  // live, inside the layer transport: the velocity is
  //   -sum_j A_j (S_j .* (A_j^T X B_j^T)) B_j
  // which keeps the Hadamard factor in layer-j coordinates instead of
  // commuting it through the Kronecker powers.
  if (adam_factors == nullptr || adam_factors->size() != static_cast<size_t>(net.depth()))
    throw InvalidInputError("predict_velocity: need one factor per layer");
  if (loss_grad.rows() != w.rows() || loss_grad.cols() != w.cols())
    throw InvalidInputError("predict_velocity: gradient shape mismatch");
  const auto svd = spectral::svd(w);
  if (svd.sigma(0) <= 0.0)
    throw DegenerateSpectrumError("predict_velocity: zero matrix");

  MatrixXd total = loss_grad;
  if (regime == Regime::AdamPenalty && pen.active())
    total += pen.lambda * penalty::penalty_gradient(pen, svd).gradient;

  const auto per_layer = layer_gradients(net, total);
  const int n = net.depth();
  MatrixXd velocity = MatrixXd::Zero(w.rows(), w.cols());
  for (int j = 0; j < n; ++j) {
    MatrixXd term = (*adam_factors)[static_cast<size_t>(j)].cwiseProduct(per_layer[static_cast<size_t>(j)]);
    for (int i = j + 1; i < n; ++i) term = net.layers[static_cast<size_t>(i)] * term;
    for (int i = j - 1; i >= 0; --i) term = term * net.layers[static_cast<size_t>(i)];
    velocity -= term;
  }
  return finish_prediction(regime, svd, std::move(velocity));
}

model::DeepLinearNet balanced_net(const Eigen::Ref<const MatrixXd>& target, int depth) {
  if (depth < 1) throw InvalidInputError("balanced_net: depth must be >= 1");
  model::DeepLinearNet net;
  if (depth == 1) {
    net.layers.push_back(target);
    return net;
  }
  const auto svd = spectral::svd(target);
  VectorXd root(svd.sigma.size());
  for (Index i = 0; i < root.size(); ++i)
    root(i) = std::pow(svd.sigma(i), 1.0 / depth);
  net.layers.push_back(root.asDiagonal() * svd.vt);  // W_1 = S^(1/N) V^T
  for (int j = 1; j + 1 < depth; ++j)
    net.layers.push_back(MatrixXd(root.asDiagonal()));
  net.layers.push_back(svd.u * root.asDiagonal());  // W_N = U S^(1/N)
  net.validate();
  return net;
}

ValidationReport validate_against_trainer(Regime regime, const model::DeepLinearNet& net,
                                          const engine::MaskedMatrix& data, double alpha,
                                          const penalty::PenaltySpec& pen) {
  if (!(alpha > 0.0) || alpha > 1e-4)
    throw InvalidInputError("validate_against_trainer: alpha must lie in (0, 1e-4]");
  const MatrixXd w0 = end_product(net);
  const auto svd0 = spectral::svd(w0);
  MatrixXd total = engine::masked_loss_gradient(w0, data);
  const bool penalized = regime == Regime::GdPenalty || regime == Regime::AdamPenalty;
  if (penalized && pen.active())
    total += pen.lambda * penalty::penalty_gradient(pen, svd0).gradient;

  const auto grads = layer_gradients(net, total);
  const bool adaptive = regime == Regime::Adam || regime == Regime::AdamPenalty;

  model::DeepLinearNet stepped = net;
  std::vector<MatrixXd> factors;
  if (adaptive) {
    opt::OptimizerSpec adam = opt::OptimizerSpec::defaults(opt::OptKind::Adam);
    adam.lr = alpha;
    opt::OptimizerState state;
    opt::step(adam, state, stepped.layers, grads);
    // Fresh-state Adam divides by |g| + eps; that is the oracle's S factor.
    factors.reserve(grads.size());
    for (const auto& g : grads)
      factors.push_back((g.array().abs() + adam.epsilon).inverse().matrix());
  } else {
    for (size_t j = 0; j < stepped.layers.size(); ++j)
      stepped.layers[j] -= alpha * grads[j];
  }

  const auto pred = predict_velocity(regime, net, engine::masked_loss_gradient(w0, data), pen,
                                     adaptive ? &factors : nullptr);

  const MatrixXd w1 = end_product(stepped);
  const MatrixXd fd_w = (w1 - w0) / alpha;
  const auto svd1 = spectral::svd(w1);
  const VectorXd fd_sv = (svd1.sigma - svd0.sigma) / alpha;

  ValidationReport report;
  report.regime = regime;
  report.alpha = alpha;
  report.degenerate_spectrum = pred.degenerate_spectrum;
  const double w_scale = std::max(fd_w.cwiseAbs().maxCoeff(), 1e-300);
  report.w_deviation = (pred.w_velocity - fd_w).cwiseAbs().maxCoeff() / w_scale;

  double sv_scale = 1e-300;
  double sv_err = 0.0;
  for (Index i = 0; i < fd_sv.size(); ++i) {
    if (svd0.sigma(i) < 1e-6 * svd0.sigma(0)) continue;
    sv_scale = std::max(sv_scale, std::abs(fd_sv(i)));
    sv_err = std::max(sv_err, std::abs(pred.sv_velocities(i) - fd_sv(i)));
  }
  report.sv_deviation = sv_err / sv_scale;
  return report;
}

std::pair<double, double> eigen_real_range(const Eigen::Ref<const MatrixXd>& p) {
  Eigen::EigenSolver<MatrixXd> solver(p, /*computeEigenvectors=*/false);
  const auto real = solver.eigenvalues().real();
  return {real.minCoeff(), real.maxCoeff()};
}

}  // namespace lowrank::dynamics
