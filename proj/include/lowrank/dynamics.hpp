#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lowrank/completion.hpp"
#include "lowrank/model.hpp"
#include "lowrank/penalty.hpp"

namespace lowrank::dynamics {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense mn x mn pre-conditioner of the end-product flow. For gradient flow
/// at depth N this is sum_j (W^T W)^((j-1)/N) (x) (W W^T)^((N-j)/N) under
/// column-major vec; each zero exponent is an identity factor (empty layer
/// product), not a range projector. With per-layer diagonal factors G_j the
/// j-th Kronecker term is right-multiplied by G_j = diag(vec(S_j)).
struct PreconditionerEval {
  MatrixXd p_matrix;
  int depth = 1;
  std::vector<VectorXd> g_diagonals;  // empty for plain gradient flow
};

/// Dense build is capped at m*n <= 2500; larger sizes throw UnsupportedError
/// (use apply_preconditioner for the matrix-free form).
PreconditionerEval preconditioner_gd(const Eigen::Ref<const MatrixXd>& w, int depth);

/// Adaptive-flow pre-conditioner with S_j = (grads_j^2 + variances_j)^(-1/2)
/// elementwise. Throws InvalidInputError on negative variance entries.
PreconditionerEval preconditioner_adam(const model::DeepLinearNet& net,
                                       const std::vector<MatrixXd>& grads,
                                       const std::vector<MatrixXd>& variances);

/// Matrix-free P * vec(x) as sum_j (WW^T)^((N-j)/N) (S_j .* x) (W^TW)^((j-1)/N);
/// pass an empty factor list for plain gradient flow.
MatrixXd apply_preconditioner(const Eigen::Ref<const MatrixXd>& w, int depth,
                              const Eigen::Ref<const MatrixXd>& x,
                              const std::vector<MatrixXd>& s_factors);

enum class Regime { Gd, GdPenalty, Adam, AdamPenalty };
const char* regime_name(Regime regime);

/// Predicted continuous-time velocities of the end product and its singular
/// values. sv_velocities(i) equals u_i^T w_velocity v_i by construction.
struct VelocityPrediction {
  VectorXd sv_velocities;
  MatrixXd w_velocity;
  Regime regime = Regime::Gd;
  bool degenerate_spectrum = false;  // repeated singular values within 1e-6*sigma_1
};

VelocityPrediction predict_velocity(Regime regime, const Eigen::Ref<const MatrixXd>& w,
                                    int depth, const Eigen::Ref<const MatrixXd>& loss_grad,
                                    const penalty::PenaltySpec& pen,
                                    const std::vector<MatrixXd>* adam_factors = nullptr);

VelocityPrediction predict_velocity(Regime regime, const model::DeepLinearNet& net,
                                    const Eigen::Ref<const MatrixXd>& loss_grad,
                                    const penalty::PenaltySpec& pen,
                                    const std::vector<MatrixXd>* adam_factors = nullptr);

/// Closed-form gradient-flow singular value velocity
/// -N (sigma_i^2)^((N-1)/N) u_i^T grad v_i for the total gradient `grad`.
VectorXd gd_sv_closed_form(const spectral::Svd& svd, int depth,
                           const Eigen::Ref<const MatrixXd>& grad);

/// One discrete optimizer step at learning rate alpha compared against the
/// predicted velocities. Deviations are max|pred - fd| normalized by the
/// largest finite-difference magnitude; singular values below 1e-6*sigma_1
/// are excluded from the spectral deviation.
struct ValidationReport {
  Regime regime = Regime::Gd;
  double alpha = 0.0;
  double w_deviation = 0.0;
  double sv_deviation = 0.0;
  bool degenerate_spectrum = false;
};

ValidationReport validate_against_trainer(Regime regime, const model::DeepLinearNet& net,
                                          const engine::MaskedMatrix& data, double alpha,
                                          const penalty::PenaltySpec& pen);

/// Balanced factorization of a target matrix: every layer shares the
/// target's singular structure so the end product equals the target and the
/// flow formulas hold exactly at initialization.
model::DeepLinearNet balanced_net(const Eigen::Ref<const MatrixXd>& target, int depth);

/// (min, max) real part of the eigenvalues of a square matrix.
std::pair<double, double> eigen_real_range(const Eigen::Ref<const MatrixXd>& p);

}  // namespace lowrank::dynamics
