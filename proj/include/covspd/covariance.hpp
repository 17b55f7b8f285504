#pragma once

#include <optional>

#include <Eigen/Dense>

#include "covspd/region.hpp"
#include "covspd/spd.hpp"
#include "covspd/tensorio.hpp"

namespace covspd {

/// m x n matrix whose columns are observations v_i in R^m. Requires n >= 2
/// and finite values.
class ObservationMatrix {
 public:
  explicit ObservationMatrix(Eigen::MatrixXd columns);

  Eigen::Index dim() const noexcept { return columns_.rows(); }
  Eigen::Index count() const noexcept { return columns_.cols(); }
  const Eigen::MatrixXd& columns() const noexcept { return columns_; }

 private:
  Eigen::MatrixXd columns_;
};

/// One observation per map pixel (or per cell of `cells`), holding that
/// pixel's value across all maps. Throws TooFewObservationsError when fewer
/// than two observations result, DataError when a cell is outside the maps.
ObservationMatrix tensor_to_observations(const FeatureTensor& t,
                                         const std::optional<MappedRegion>& cells = std::nullopt);

/// Sample covariance with 1/(n-1) normalization, computed in two passes.
SymMatrix compute_covariance(const ObservationMatrix& obs);

/// C + epsilon*I. Throws NotPsdError when C has an eigenvalue below
/// -1e-10 * max(1, trace C).
SpdMatrix regularize(const SymMatrix& c, double epsilon);

}  // namespace covspd
