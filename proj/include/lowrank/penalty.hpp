#pragma once

#include <string>

#include <Eigen/Core>

#include "lowrank/spectral.hpp"

namespace lowrank::penalty {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Spectral penalty R(W) selector with regularization strength lambda.
/// Kinds:
///   None           - contributes exactly 0 to loss and gradient
///   Ratio          - ||W||_* / ||W||_F
///   Nuclear        - ||W||_*
///   Schatten       - (sum sigma_i^p)^(1/p), p < 1 allowed (quasi-norm)
///   SchattenRatio  - Schatten(p) / Schatten(q), requires p < q
struct PenaltySpec {
  enum class Kind { None, Ratio, Nuclear, Schatten, SchattenRatio };

  Kind kind = Kind::None;
  double lambda = 0.0;
  double p = 0.0;
  double q = 0.0;

  static PenaltySpec none() { return {}; }
  static PenaltySpec ratio(double lambda);
  static PenaltySpec nuclear(double lambda);
  static PenaltySpec schatten(double p, double lambda);
  static PenaltySpec schatten_ratio(double p, double q, double lambda);

  bool active() const { return kind != Kind::None && lambda != 0.0; }

  /// Throws InvalidConfigError if lambda < 0, p/q outside {1/3, 1/2, 2/3}
  /// where applicable, or p >= q for SchattenRatio.
  void validate() const;

  /// Compact identifier, e.g. "ratio", "schatten:1/2", "schatten_ratio:1/3:2/3".
  std::string name() const;
  /// Parses the identifiers produced by name(); also accepts "none" etc.
  static PenaltySpec parse(const std::string& text, double lambda);
};

/// Penalty value and its gradient with respect to W, both unscaled by lambda.
struct PenaltyEval {
  double value = 0.0;
  MatrixXd gradient;
};

/// R(W) for the selected kind (unscaled by lambda). Ratio-type kinds throw
/// DegenerateSpectrumError when ||W||_F < 1e-12.
double penalty_value(const PenaltySpec& spec, const Eigen::Ref<const MatrixXd>& w);

/// Same, evaluated from a precomputed spectrum.
double penalty_value_sigma(const PenaltySpec& spec, const Eigen::Ref<const VectorXd>& sigma);

/// Analytic gradient U diag(df/dsigma) V^T of the spectral function behind
/// the kind, evaluated at a thin SVD of W. Singular values at or below
/// 1e-12 * sigma_max are treated as exactly zero for the nuclear-norm part
/// and clamped there inside negative powers of quasi-norms.
PenaltyEval penalty_gradient(const PenaltySpec& spec, const spectral::Svd& svd);

}  // namespace lowrank::penalty
