#include "lowrank/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "lowrank/spectral.hpp"

namespace lowrank::baseline {

namespace {

MatrixXd observed_fill(const MaskedMatrix& data) {
  MatrixXd x = MatrixXd::Zero(data.rows, data.cols);
  for (size_t t = 0; t < data.obs_row.size(); ++t)
    x(data.obs_row[t], data.obs_col[t]) = data.obs_val(static_cast<Eigen::Index>(t));
  return x;
}

void overwrite_observed(MatrixXd& x, const MaskedMatrix& data) {
  for (size_t t = 0; t < data.obs_row.size(); ++t)
    x(data.obs_row[t], data.obs_col[t]) = data.obs_val(static_cast<Eigen::Index>(t));
}

double observed_residual_norm(const MatrixXd& x, const MaskedMatrix& data) {
  double sum = 0.0;
  for (size_t t = 0; t < data.obs_row.size(); ++t) {
    const double r =
        x(data.obs_row[t], data.obs_col[t]) - data.obs_val(static_cast<Eigen::Index>(t));
    sum += r * r;
  }
  return std::sqrt(sum);
}

}  // namespace

MatrixXd svt_shrink(const Eigen::Ref<const MatrixXd>& a, double tau) {
  auto svd = spectral::svd(a);
  for (Eigen::Index i = 0; i < svd.sigma.size(); ++i)
    svd.sigma(i) = std::max(svd.sigma(i) - tau, 0.0);
  return svd.u * svd.sigma.asDiagonal() * svd.vt;
}

BaselineResult soft_impute(const MaskedMatrix& data, double shrink, long max_iters,
                           double tol, const MatrixXd* warm_start) {
  data.validate();
  if (data.sample_size() == 0) throw InvalidInputError("soft_impute: empty observation set");
  if (shrink < 0.0) throw InvalidInputError("soft_impute: shrink must be >= 0");

  BaselineResult out;
  MatrixXd z = warm_start != nullptr ? *warm_start : MatrixXd::Zero(data.rows, data.cols);
  spectral::SvdComputer svd_engine;
  for (long it = 0; it < max_iters; ++it) {
    MatrixXd filled = z;
    overwrite_observed(filled, data);
    auto svd = svd_engine.compute(filled);
    for (Eigen::Index i = 0; i < svd.sigma.size(); ++i)
      svd.sigma(i) = std::max(svd.sigma(i) - shrink, 0.0);
    MatrixXd z_new = svd.u * svd.sigma.asDiagonal() * svd.vt;

    const double res = observed_residual_norm(z_new, data);
    out.objective_trace.push_back(0.5 * res * res + shrink * svd.sigma.sum());
    const double delta = (z_new - z).norm();
    const double base = std::max(z.norm(), 1e-12);
    z = std::move(z_new);
    out.iterations = it + 1;
    if (delta / base < tol) {
      out.converged = true;
      break;
    }
  }
  out.estimate = std::move(z);
  return out;
}

BaselineResult soft_impute_ladder(const MaskedMatrix& data, int ladder_steps,
                                  double ladder_top_frac, double ladder_floor_frac,
                                  long max_iters_per_step, double tol) {
  data.validate();
  if (data.sample_size() == 0)
    throw InvalidInputError("soft_impute_ladder: empty observation set");
  const MatrixXd filled = observed_fill(data);
  const double sigma1 = spectral::svd(filled).sigma(0);
  const double top = ladder_top_frac * sigma1;
  const double floor = ladder_floor_frac * sigma1;
  const double decay =
      ladder_steps > 1 ? std::pow(floor / top, 1.0 / (ladder_steps - 1)) : 1.0;

  BaselineResult out;
  MatrixXd warm = MatrixXd::Zero(data.rows, data.cols);
  double shrink = top;
  long total_iters = 0;
  for (int s = 0; s < ladder_steps; ++s) {
    BaselineResult step = soft_impute(data, shrink, max_iters_per_step, tol, &warm);
    warm = step.estimate;
    total_iters += step.iterations;
    out.objective_trace.insert(out.objective_trace.end(), step.objective_trace.begin(),
                               step.objective_trace.end());
    out.converged = step.converged;
    shrink *= decay;
  }
  out.estimate = std::move(warm);
  out.iterations = total_iters;
  return out;
}

BaselineResult nuclear_min(const MaskedMatrix& data, long max_iters, double tol) {
  data.validate();
  if (data.sample_size() == 0) throw InvalidInputError("nuclear_min: empty observation set");

  // Proximal-gradient continuation: solve the shrinkage problem at a
  // decreasing threshold with warm starts. As tau -> 0 the path approaches
  // the minimum-nuclear-norm interpolant; stop once the thresholded iterate
  // already meets the data constraint to the requested tolerance.
  BaselineResult out;
  const MatrixXd filled = observed_fill(data);
  const double sigma1 = spectral::svd(filled).sigma(0);
  const double data_norm = std::max(data.obs_val.norm(), 1e-12);

  MatrixXd z = MatrixXd::Zero(data.rows, data.cols);
  double tau = 0.5 * sigma1;
  const double tau_decay = 0.7;
  const double tau_floor = 1e-10 * sigma1;
  long total = 0;
  while (total < max_iters) {
    const long inner_budget = std::min<long>(200, max_iters - total);
    BaselineResult stage = soft_impute(data, tau, inner_budget, tol, &z);
    z = std::move(stage.estimate);
    total += stage.iterations;

    const double nuclear = spectral::svd(z).sigma.sum();
    out.objective_trace.push_back(nuclear);
    const double residual = observed_residual_norm(z, data) / data_norm;
    if (residual < tol) {
      out.converged = true;
      break;
    }
    if (tau <= tau_floor) break;
    tau = std::max(tau * tau_decay, tau_floor);
  }
  out.iterations = total;
  // Exact feasibility on the observed set.
  overwrite_observed(z, data);
  out.estimate = std::move(z);
  return out;
}

}  // namespace lowrank::baseline
