#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "lowrank/errors.hpp"

namespace lowrank::opt {

using Eigen::MatrixXd;

enum class OptKind {
  Gd,
  GdMomentum,
  Adam,
  AdamW,
  Adamax,
  Nadam,
  Radam,
  Adagrad,
  Adadelta,
  Rmsprop,
};

/// Update-rule selector plus hyperparameters. Fields that a rule does not
/// use are ignored. `beta2` doubles as RMSProp's smoothing constant and
/// Adadelta's rho (their conventional defaults are applied by defaults()).
struct OptimizerSpec {
  OptKind kind = OptKind::Gd;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.0;
  double weight_decay = 0.0;
  bool amsgrad = false;

  /// Canonical per-rule defaults at the fixed lr = 1e-3.
  static OptimizerSpec defaults(OptKind kind);
  static OptKind parse_kind(const std::string& name);
  static std::string kind_name(OptKind kind);

  void validate() const;
};

/// Per-parameter moment buffers. Which of m/v/extra a rule touches depends
/// on the kind; step_count increments by exactly one per step() call.
struct OptimizerState {
  std::vector<MatrixXd> m;
  std::vector<MatrixXd> v;
  std::vector<MatrixXd> extra;  // amsgrad v_max / adamax u / adadelta delta accumulator
  double mu_product = 1.0;      // nadam momentum schedule product
  long step_count = 0;

  bool initialized() const { return !m.empty(); }
};

/// Applies one full-batch update of the selected rule to every parameter in
/// place. The state is created lazily (zeros) on the first call. Throws
/// InvalidInputError on shape mismatch and DivergedError (with the step
/// index) if any gradient entry is non-finite.
void step(const OptimizerSpec& spec, OptimizerState& state, std::vector<MatrixXd>& params,
          const std::vector<MatrixXd>& grads);

}  // namespace lowrank::opt
