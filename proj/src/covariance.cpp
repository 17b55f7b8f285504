#include "covspd/covariance.hpp"

#include <sstream>

#include "covspd/errors.hpp"

namespace covspd {

ObservationMatrix::ObservationMatrix(Eigen::MatrixXd columns) : columns_(std::move(columns)) {
  if (columns_.cols() < 2) {
    throw TooFewObservationsError("covariance needs at least 2 observations, got " +
                                  std::to_string(columns_.cols()));
  }
  if (columns_.rows() < 1) throw UsageError("observations must have at least one feature");
  if (!columns_.allFinite()) throw DataError("observations contain non-finite values");
}

ObservationMatrix tensor_to_observations(const FeatureTensor& t,
                                         const std::optional<MappedRegion>& cells) {
  const auto m = static_cast<Eigen::Index>(t.maps());
  if (!cells) {
    const auto n = static_cast<Eigen::Index>(t.height()) * t.width();
    Eigen::MatrixXd obs(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto plane = t.map(static_cast<std::uint32_t>(i));
      for (Eigen::Index j = 0; j < n; ++j) obs(i, j) = plane[j];
    }
    return ObservationMatrix(std::move(obs));
  }

  const auto n = static_cast<Eigen::Index>(cells->cells.size());
  Eigen::MatrixXd obs(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Cell& c = cells->cells[j];
    if (c.col < 0 || c.row < 0 || c.col >= static_cast<int>(t.width()) ||
        c.row >= static_cast<int>(t.height())) {
      throw DataError("region \"" + cells->name + "\" cell outside feature map");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      obs(i, j) = t.at(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(c.row),
                       static_cast<std::uint32_t>(c.col));
    }
  }
  return ObservationMatrix(std::move(obs));
}

SymMatrix compute_covariance(const ObservationMatrix& obs) {
  const Eigen::VectorXd mean = obs.columns().rowwise().mean();
  const Eigen::MatrixXd centered = obs.columns().colwise() - mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(obs.dim(), obs.dim());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(centered);
  cov /= static_cast<double>(obs.count() - 1);
  // rankUpdate fills the lower triangle only.
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose().triangularView<Eigen::StrictlyUpper>();
  return SymMatrix::from_symmetric(std::move(cov));
}

SpdMatrix regularize(const SymMatrix& c, double epsilon) {
  if (!(epsilon > 0.0)) throw UsageError("regularization epsilon must be positive");
  EigenDecomposition eig = sym_eig(c);
  const double trace = c.values().trace();
  const double tolerance = -1e-10 * std::max(1.0, std::abs(trace));
  if (eig.eigenvalues.size() > 0 && eig.eigenvalues(0) < tolerance) {
    std::ostringstream msg;
    msg << "covariance is not PSD: smallest eigenvalue " << eig.eigenvalues(0);
    throw NotPsdError(msg.str());
  }
  Eigen::MatrixXd shifted = c.values();
  shifted.diagonal().array() += epsilon;
  eig.eigenvalues.array() += epsilon;
  return SpdMatrix(SymMatrix::from_symmetric(std::move(shifted)), std::move(eig), epsilon);
}

}  // namespace covspd
