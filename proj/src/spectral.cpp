#include "lowrank/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace lowrank::spectral {

namespace {

// Pairwise-orthogonality stop for the Jacobi sweeps. Tighter than the
// 1e-12 the public contracts promise so downstream finite-difference checks
// are not limited by decomposition noise.
constexpr double kJacobiTol = 1e-14;
constexpr double kZeroSigmaRel = 1e-12;

void require_finite(const Eigen::Ref<const MatrixXd>& a, const char* who) {
  if (a.rows() < 1 || a.cols() < 1)
    throw InvalidInputError(std::string(who) + ": empty matrix");
  if (!a.allFinite())
    throw InvalidInputError(std::string(who) + ": non-finite entries");
}

// Orthogonalizes columns p and q of b in place (and the matching columns of
// v) so that the (p,q) entry of b^T b vanishes. Rutishauser's formulas.
inline void rotate_pair(MatrixXd& b, MatrixXd& v, Index p, Index q,
                        double dpp, double dqq, double dpq) {
  const double zeta = (dqq - dpp) / (2.0 * dpq);
  const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
  const double cs = 1.0 / std::sqrt(1.0 + t * t);
  const double sn = cs * t;
  const VectorXd bp = b.col(p);
  b.col(p) = cs * bp - sn * b.col(q);
  b.col(q) = sn * bp + cs * b.col(q);
  const VectorXd vp = v.col(p);
  v.col(p) = cs * vp - sn * v.col(q);
  v.col(q) = sn * vp + cs * v.col(q);
}

// One-sided Jacobi on b (m x n, m >= n not required): returns when every
// column pair is numerically orthogonal relative to the column norms.
// v accumulates the right rotations on top of its initial contents.
// Column norms are cached per sweep and updated through each rotation, so a
// converged sweep costs one dot product per pair.
double jacobi_orthogonalize(MatrixXd& b, MatrixXd& v, long max_sweeps) {
  const Index n = b.cols();
  const double frob2 = b.squaredNorm();
  const double negligible2 = frob2 * 1e-300 + 1e-300;
  VectorXd d(n);
  double worst = 0.0;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    for (Index i = 0; i < n; ++i) d(i) = b.col(i).squaredNorm();
    worst = 0.0;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double dpp = d(p);
        const double dqq = d(q);
        if (dpp <= negligible2 || dqq <= negligible2) continue;
        const double dpq = b.col(p).dot(b.col(q));
        const double ratio = std::abs(dpq) / std::sqrt(dpp * dqq);
        worst = std::max(worst, ratio);
        if (ratio > kJacobiTol) {
          rotate_pair(b, v, p, q, dpp, dqq, dpq);
          const double zeta = (dqq - dpp) / (2.0 * dpq);
          const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                           (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
          d(p) = dpp - t * dpq;
          d(q) = dqq + t * dpq;
        }
      }
    }
    if (worst <= kJacobiTol) return worst;
  }
  // One clean pass after the last sweep to measure the residual.
  worst = 0.0;
  for (Index p = 0; p + 1 < n; ++p)
    for (Index q = p + 1; q < n; ++q) {
      const double dpp = b.col(p).squaredNorm();
      const double dqq = b.col(q).squaredNorm();
      if (dpp <= negligible2 || dqq <= negligible2) continue;
      worst = std::max(worst, std::abs(b.col(p).dot(b.col(q))) / std::sqrt(dpp * dqq));
    }
  if (worst > kJacobiTol) return -worst;  // signals non-convergence
  return worst;
}

// Fills columns of u flagged in `missing` with an orthonormal completion.
// Each slot takes the canonical basis vector with the largest residual after
// projecting out the existing columns (deterministic tie-break on index).
void complete_basis(MatrixXd& u, const std::vector<Index>& missing) {
  const Index m = u.rows();
  for (Index col : missing) {
    VectorXd best;
    double best_norm = -1.0;
    for (Index j = 0; j < m; ++j) {
      VectorXd cand = VectorXd::Unit(m, j);
      for (Index c = 0; c < u.cols(); ++c)
        if (u.col(c).squaredNorm() > 0.25) cand -= u.col(c).dot(cand) * u.col(c);
      const double norm = cand.norm();
      if (norm > best_norm + 1e-12) {
        best_norm = norm;
        best = cand;
      }
    }
    u.col(col) = best / best_norm;
  }
}

Svd svd_with_start(const Eigen::Ref<const MatrixXd>& a, const MatrixXd* v0) {
  require_finite(a, "svd");
  const Index m = a.rows();
  const Index n = a.cols();
  const Index k = std::min(m, n);
  const long max_sweeps = 100 * static_cast<long>(k);

  // Work on the transpose when n > m so the short side is orthogonalized.
  const bool flip = n > m;
  MatrixXd b = flip ? MatrixXd(a.transpose()) : MatrixXd(a);
  MatrixXd v;
  if (v0 != nullptr && v0->rows() == b.cols() && v0->cols() == b.cols()) {
    b = b * (*v0);
    v = *v0;
  } else {
    v = MatrixXd::Identity(b.cols(), b.cols());
  }

  const double residual = jacobi_orthogonalize(b, v, max_sweeps);
  if (residual < 0.0)
    throw NumericalFailureError("svd: Jacobi sweeps did not converge", -residual);

  VectorXd norms = b.colwise().norm();
  std::vector<Index> order(static_cast<size_t>(b.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return norms(i) > norms(j); });

  MatrixXd left(b.rows(), k);
  MatrixXd right(v.rows(), k);
  VectorXd sigma(k);
  const double sigma_max = norms.size() > 0 ? norms.maxCoeff() : 0.0;
  std::vector<Index> missing;
  for (Index i = 0; i < k; ++i) {
    const Index src = order[static_cast<size_t>(i)];
    sigma(i) = norms(src);
    right.col(i) = v.col(src);
    if (sigma(i) > sigma_max * 1e-300 && sigma(i) > 0.0) {
      left.col(i) = b.col(src) / sigma(i);
    } else {
      sigma(i) = 0.0;
      left.col(i).setZero();
      missing.push_back(i);
    }
  }
  if (!missing.empty()) complete_basis(left, missing);

  Svd out;
  if (flip) {
    out.u = right;          // m x k
    out.vt = left.transpose();
  } else {
    out.u = left;
    out.vt = right.transpose();
  }
  out.sigma = sigma;
  return out;
}

}  // namespace

Svd svd(const Eigen::Ref<const MatrixXd>& a) { return svd_with_start(a, nullptr); }

Svd SvdComputer::compute(const Eigen::Ref<const MatrixXd>& a) {
  Svd out = svd_with_start(a, warm_ ? &v_ : nullptr);
  // Cache the basis of the side that was orthogonalized.
  if (a.cols() <= a.rows()) {
    v_ = out.vt.transpose();
  } else {
    v_ = out.u;
  }
  warm_ = true;
  return out;
}

double effective_rank(const Eigen::Ref<const VectorXd>& sigma) {
  if (sigma.size() == 0) throw InvalidInputError("effective_rank: empty spectrum");
  if (!sigma.allFinite() || sigma.minCoeff() < 0.0)
    throw InvalidInputError("effective_rank: spectrum must be finite and non-negative");
  const double smax = sigma.maxCoeff();
  if (smax <= 0.0)
    throw DegenerateSpectrumError("effective_rank: all singular values are zero");
  const double cut = kZeroSigmaRel * smax;
  double total = 0.0;
  for (Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cut) total += sigma(i);
  double entropy = 0.0;
  for (Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) <= cut) continue;
    const double p = sigma(i) / total;
    entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

SpectralMeasures measure(const Eigen::Ref<const VectorXd>& sigma, Index top_count) {
  SpectralMeasures out;
  out.effective_rank = effective_rank(sigma);
  out.nuclear_norm = sigma.sum();
  out.frobenius_norm = sigma.norm();
  const Index s = std::min<Index>(top_count, sigma.size());
  out.top_singular_values = sigma.head(s);
  return out;
}

void symmetric_eigen(const Eigen::Ref<const MatrixXd>& a, VectorXd& evals, MatrixXd& evecs) {
  require_finite(a, "symmetric_eigen");
  const Index n = a.rows();
  if (a.cols() != n) throw InvalidInputError("symmetric_eigen: matrix must be square");
  MatrixXd d = 0.5 * (a + a.transpose());
  evecs = MatrixXd::Identity(n, n);
  const double scale = std::max(d.cwiseAbs().maxCoeff(), 1e-300);
  const long max_sweeps = 100 * static_cast<long>(n);
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = d(p, q);
        off = std::max(off, std::abs(apq) / scale);
        if (std::abs(apq) <= kJacobiTol * scale) continue;
        const double zeta = (d(q, q) - d(p, p)) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        // D <- J^T D J, applied as column then row rotations.
        const VectorXd dp = d.col(p);
        d.col(p) = cs * dp - sn * d.col(q);
        d.col(q) = sn * dp + cs * d.col(q);
        const VectorXd rp = d.row(p);
        d.row(p) = cs * rp.transpose() - sn * d.row(q);
        d.row(q) = sn * rp.transpose() + cs * d.row(q);
        const VectorXd vp = evecs.col(p);
        evecs.col(p) = cs * vp - sn * evecs.col(q);
        evecs.col(q) = sn * vp + cs * evecs.col(q);
      }
    }
    if (off <= kJacobiTol) break;
  }
  evals = d.diagonal();
  // Sort descending, carrying eigenvectors along.
  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return evals(i) > evals(j); });
  VectorXd sorted_vals(n);
  MatrixXd sorted_vecs(n, n);
  for (Index i = 0; i < n; ++i) {
    sorted_vals(i) = evals(order[static_cast<size_t>(i)]);
    sorted_vecs.col(i) = evecs.col(order[static_cast<size_t>(i)]);
  }
  evals = sorted_vals;
  evecs = sorted_vecs;
}

MatrixXd psd_fractional_power(const Eigen::Ref<const MatrixXd>& a, double exponent) {
  require_finite(a, "psd_fractional_power");
  if (a.rows() != a.cols())
    throw InvalidInputError("psd_fractional_power: matrix must be square");
  if (exponent < 0.0 || exponent > 1.0)
    throw InvalidInputError("psd_fractional_power: exponent must lie in [0, 1]");
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidInputError("psd_fractional_power: input is not symmetric");
  VectorXd evals;
  MatrixXd evecs;
  symmetric_eigen(a, evals, evecs);
  // Roundoff-scale eigenvalues count as zero so exponent 0 yields the range
  // projector rather than picking up noise directions.
  const double cut = kZeroSigmaRel * std::max(evals.maxCoeff(), 0.0);
  VectorXd powered(evals.size());
  for (Index i = 0; i < evals.size(); ++i) {
    const double lam = evals(i);
    powered(i) = lam > cut ? std::pow(lam, exponent) : 0.0;
  }
  return evecs * powered.asDiagonal() * evecs.transpose();
}

VectorXd vec(const Eigen::Ref<const MatrixXd>& a) {
  require_finite(a, "vec");
  return Eigen::Map<const VectorXd>(a.data(), a.size());
}

MatrixXd unvec(const Eigen::Ref<const VectorXd>& x, Index rows, Index cols) {
  if (x.size() != rows * cols)
    throw InvalidInputError("unvec: length does not match the requested shape");
  return Eigen::Map<const MatrixXd>(x.data(), rows, cols);
}

MatrixXd kron(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const MatrixXd>& b) {
  require_finite(a, "kron");
  require_finite(b, "kron");
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace lowrank::spectral
