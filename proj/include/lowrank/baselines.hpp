#pragma once

#include <vector>

#include <Eigen/Core>

#include "lowrank/completion.hpp"

namespace lowrank::baseline {

using Eigen::MatrixXd;
using engine::MaskedMatrix;

struct BaselineResult {
  MatrixXd estimate;
  long iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Soft-thresholds the singular values of a: sigma <- max(sigma - tau, 0).
MatrixXd svt_shrink(const Eigen::Ref<const MatrixXd>& a, double tau);

/// Fixed-shrink SoftImpute: iterates Z <- SVT_shrink(P_obs(data) + P_comp(Z))
/// until the relative Frobenius change drops below tol. The objective trace
/// records 0.5*||P_obs(data - Z)||_F^2 + shrink*||Z||_*.
BaselineResult soft_impute(const MaskedMatrix& data, double shrink, long max_iters,
                           double tol, const MatrixXd* warm_start = nullptr);

/// SoftImpute along a geometric shrink ladder from ladder_top_frac*sigma_1
/// down to ladder_floor_frac*sigma_1 with warm starts; returns the result at
/// the final (smallest) shrink. The default floor sigma_1/50 matches the
/// reference implementation's shrinkage choice; lower floors interpolate
/// toward the nuclear-norm-minimal completion.
BaselineResult soft_impute_ladder(const MaskedMatrix& data, int ladder_steps = 10,
                                  double ladder_top_frac = 0.5,
                                  double ladder_floor_frac = 0.02,
                                  long max_iters_per_step = 200, double tol = 1e-6);

/// Approximate minimum-nuclear-norm completion: singular value thresholding
/// with a decreasing threshold and projection onto the data constraint after
/// every shrink. Converged when the pre-projection constraint residual falls
/// below tol and the nuclear norm has stabilized.
BaselineResult nuclear_min(const MaskedMatrix& data, long max_iters, double tol);

}  // namespace lowrank::baseline
