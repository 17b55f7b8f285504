#include "covspd/spd.hpp"

#include <cmath>
#include <sstream>

#include "covspd/diagnostics.hpp"
#include "covspd/errors.hpp"

namespace covspd {
namespace {

constexpr double kLogFloor = 1e-14;
constexpr double kBoundSlack = 1e-6;

void check_square_finite(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionMismatchError("matrix is not square");
  if (!m.allFinite()) throw DataError("matrix has non-finite entries");
}

void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      // Strict comparison keeps the first index on ties.
      if (std::abs(vectors(i, j)) > best_abs) {
        best_abs = std::abs(vectors(i, j));
        best = i;
      }
    }
    if (vectors(best, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }
}

}  // namespace

SymMatrix::SymMatrix(const Eigen::MatrixXd& values) {
  check_square_finite(values);
  values_ = 0.5 * (values + values.transpose());
}

SymMatrix SymMatrix::from_symmetric(Eigen::MatrixXd values) {
  check_square_finite(values);
  SymMatrix out;
  out.values_ = std::move(values);
  out.values_.triangularView<Eigen::StrictlyLower>() =
      out.values_.transpose().triangularView<Eigen::StrictlyLower>();
  return out;
}

EigenDecomposition sym_eig(const SymMatrix& a) {
  if (a.dim() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a.values(), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw EigensolverError("symmetric eigensolver did not converge (dim " +
                           std::to_string(a.dim()) + ")");
  }
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  canonicalize_signs(out.eigenvectors);
  return out;
}

SpdMatrix::SpdMatrix(const SymMatrix& a, double min_eigenvalue_bound)
    : SpdMatrix(a, sym_eig(a), min_eigenvalue_bound) {}

SpdMatrix::SpdMatrix(SymMatrix a, EigenDecomposition eig, double min_eigenvalue_bound)
    : matrix_(std::move(a)), eig_(std::move(eig)), bound_(min_eigenvalue_bound) {
  if (!(bound_ > 0.0)) throw UsageError("SPD eigenvalue bound must be positive");
  if (eig_.eigenvalues.size() != matrix_.dim()) {
    throw DimensionMismatchError("eigendecomposition does not match matrix");
  }
  if (matrix_.dim() == 0) throw DimensionMismatchError("empty SPD matrix");
  const double smallest = eig_.eigenvalues.minCoeff();
  if (smallest < bound_ * (1.0 - kBoundSlack)) {
    std::ostringstream msg;
    msg << "matrix is not positive definite enough: smallest eigenvalue " << smallest
        << " < bound " << bound_;
    throw NotPsdError(msg.str());
  }
}

SymMatrix matrix_log(const SpdMatrix& c) {
  const auto& eig = c.eig();
  Eigen::VectorXd logs(eig.eigenvalues.size());
  for (Eigen::Index i = 0; i < logs.size(); ++i) {
    const double lambda = eig.eigenvalues(i);
    if (lambda < 0.5 * c.min_eigenvalue_bound()) {
      warn("matrix_log: eigenvalue " + std::to_string(lambda) + " below half the SPD bound");
    }
    logs(i) = std::log(std::max(lambda, kLogFloor));
  }
  const Eigen::MatrixXd& q = eig.eigenvectors;
  return SymMatrix(q * logs.asDiagonal() * q.transpose());
}

double squared_log_euclidean_distance(const SymMatrix& log1, const SymMatrix& log2) {
  if (log1.dim() != log2.dim()) {
    throw DimensionMismatchError("log-Euclidean distance: dims " + std::to_string(log1.dim()) +
                                 " and " + std::to_string(log2.dim()));
  }
  return (log1.values() - log2.values()).squaredNorm();
}

double log_euclidean_distance(const SymMatrix& log1, const SymMatrix& log2) {
  return std::sqrt(squared_log_euclidean_distance(log1, log2));
}

double log_euclidean_distance(const SpdMatrix& c1, const SpdMatrix& c2) {
  if (c1.dim() != c2.dim()) {
    throw DimensionMismatchError("log-Euclidean distance: dims " + std::to_string(c1.dim()) +
                                 " and " + std::to_string(c2.dim()));
  }
  return log_euclidean_distance(matrix_log(c1), matrix_log(c2));
}

}  // namespace covspd
