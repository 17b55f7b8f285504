#pragma once

#include <Eigen/Dense>

namespace covspd {

/// Dense symmetric matrix. Symmetry is enforced on construction by averaging
/// with the transpose, so |A(i,j) - A(j,i)| is exactly zero afterwards.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& values);
  static SymMatrix zero(Eigen::Index dim) { return SymMatrix(Eigen::MatrixXd::Zero(dim, dim)); }
  static SymMatrix identity(Eigen::Index dim) {
    return SymMatrix(Eigen::MatrixXd::Identity(dim, dim));
  }
  /// Wraps a matrix the caller has already made exactly symmetric.
  static SymMatrix from_symmetric(Eigen::MatrixXd values);

  Eigen::Index dim() const noexcept { return values_.rows(); }
  const Eigen::MatrixXd& values() const noexcept { return values_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }

 private:
  Eigen::MatrixXd values_;
};

struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // orthonormal columns
};

/// Symmetric eigendecomposition. Each eigenvector is signed so that its
/// largest-magnitude component (first one on ties) is positive.
/// Throws EigensolverError if the solver fails to converge.
EigenDecomposition sym_eig(const SymMatrix& a);

/// Symmetric positive definite matrix together with its eigendecomposition.
/// Invariant: smallest eigenvalue >= min_eigenvalue_bound * (1 - 1e-6).
class SpdMatrix {
 public:
  /// Validates `a` by eigendecomposition; throws NotPsdError if the smallest
  /// eigenvalue is below bound * (1 - 1e-6) or bound is not positive.
  SpdMatrix(const SymMatrix& a, double min_eigenvalue_bound);

  /// Builds from a known decomposition of `a` (used by regularize, which
  /// shifts the spectrum of an already decomposed matrix).
  SpdMatrix(SymMatrix a, EigenDecomposition eig, double min_eigenvalue_bound);

  Eigen::Index dim() const noexcept { return matrix_.dim(); }
  const SymMatrix& matrix() const noexcept { return matrix_; }
  const Eigen::MatrixXd& values() const noexcept { return matrix_.values(); }
  const EigenDecomposition& eig() const noexcept { return eig_; }
  double min_eigenvalue_bound() const noexcept { return bound_; }

 private:
  SymMatrix matrix_;
  EigenDecomposition eig_;
  double bound_;
};

/// Spectral matrix logarithm Q diag(ln lambda) Q^T. Eigenvalues are clamped
/// below at 1e-14; a warning is emitted for eigenvalues under half the bound.
SymMatrix matrix_log(const SpdMatrix& c);

/// ||log C1 - log C2||_F. Throws DimensionMismatchError on unequal dims.
double log_euclidean_distance(const SpdMatrix& c1, const SpdMatrix& c2);

/// Same distance given precomputed logarithms.
double log_euclidean_distance(const SymMatrix& log1, const SymMatrix& log2);

/// Squared Frobenius distance between precomputed logarithms.
double squared_log_euclidean_distance(const SymMatrix& log1, const SymMatrix& log2);

}  // namespace covspd
