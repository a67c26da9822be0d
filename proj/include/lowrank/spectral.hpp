#pragma once

#include <Eigen/Core>

#include "lowrank/errors.hpp"

namespace lowrank::spectral {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Thin singular value decomposition a = u * sigma.asDiagonal() * vt with
/// sigma sorted non-increasing and u, vt^T orthonormal (k = min(m, n)).
struct Svd {
  MatrixXd u;
  VectorXd sigma;
  MatrixXd vt;

  MatrixXd reconstruct() const { return u * sigma.asDiagonal() * vt; }
};

/// One-sided Jacobi SVD. Deterministic for a fixed input. Throws
/// InvalidInputError on non-finite entries and NumericalFailureError
/// (carrying the residual) if the sweep cap is hit.
Svd svd(const Eigen::Ref<const MatrixXd>& a);

/// SVD engine that reuses the right singular basis of the previous call as a
/// warm start. Intended for trajectories where consecutive inputs are close;
/// results stay within the same tolerance as the cold path.
class SvdComputer {
 public:
  Svd compute(const Eigen::Ref<const MatrixXd>& a);
  void reset() { warm_ = false; }

 private:
  MatrixXd v_;
  bool warm_ = false;
};

/// Summary spectral quantities of a matrix with spectrum `sigma`.
struct SpectralMeasures {
  double effective_rank = 0.0;
  double nuclear_norm = 0.0;
  double frobenius_norm = 0.0;
  VectorXd top_singular_values;
};

/// exp of the Shannon entropy (natural log) of sigma normalized to a
/// probability vector. Entries below 1e-12 * max(sigma) count as zero.
/// Throws DegenerateSpectrumError if every entry is zero.
double effective_rank(const Eigen::Ref<const VectorXd>& sigma);

SpectralMeasures measure(const Eigen::Ref<const VectorXd>& sigma, Index top_count);

/// v * diag(lambda^exponent) * v^T for a symmetric PSD input; negative
/// eigenvalues are clamped to zero first. At exponent 0 this is the
/// projector onto the range (0^0 := 0). exponent must lie in [0, 1].
MatrixXd psd_fractional_power(const Eigen::Ref<const MatrixXd>& a, double exponent);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix,
/// eigenvalues descending. a = evecs * evals.asDiagonal() * evecs^T.
void symmetric_eigen(const Eigen::Ref<const MatrixXd>& a, VectorXd& evals, MatrixXd& evecs);

/// Column-first vectorization and its inverse.
VectorXd vec(const Eigen::Ref<const MatrixXd>& a);
MatrixXd unvec(const Eigen::Ref<const VectorXd>& x, Index rows, Index cols);

/// Kronecker product; satisfies vec(a*x*b) = kron(b^T, a) * vec(x).
MatrixXd kron(const Eigen::Ref<const MatrixXd>& a, const Eigen::Ref<const MatrixXd>& b);

}  // namespace lowrank::spectral
