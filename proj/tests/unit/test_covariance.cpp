#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "covspd/covariance.hpp"
#include "covspd/errors.hpp"
#include "support.hpp"

using namespace covspd;
using covspd::testing::naive_covariance;
using covspd::testing::Rng;

TEST_CASE("tensor_to_observations unrolls positions row-major") {
  const FeatureTensor t(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  const ObservationMatrix obs = tensor_to_observations(t);
  REQUIRE(obs.dim() == 2);
  REQUIRE(obs.count() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(obs.columns()(0, k) == k + 1);
    CHECK(obs.columns()(1, k) == k + 5);
  }
}

TEST_CASE("tensor_to_observations restricted to cells") {
  const FeatureTensor t(2, 2, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  const MappedRegion two{"r", {{1, 0}, {0, 1}}, 1.0};
  const ObservationMatrix obs = tensor_to_observations(t, two);
  REQUIRE(obs.count() == 2);
  CHECK(obs.columns()(0, 0) == 2);
  CHECK(obs.columns()(1, 0) == 6);
  CHECK(obs.columns()(0, 1) == 3);
  CHECK(obs.columns()(1, 1) == 7);

  const MappedRegion one{"r", {{0, 0}}, 1.0};
  CHECK_THROWS_AS(tensor_to_observations(t, one), TooFewObservationsError);
  const MappedRegion outside{"r", {{0, 0}, {5, 5}}, 1.0};
  CHECK_THROWS(tensor_to_observations(t, outside));
}

TEST_CASE("512x7x7 tensor gives 49 observations of dim 512") {
  Rng rng(1);
  std::vector<float> data(512 * 49);
  for (float& v : data) v = static_cast<float>(rng.normal());
  const ObservationMatrix obs = tensor_to_observations(FeatureTensor(512, 7, 7, data));
  CHECK(obs.dim() == 512);
  CHECK(obs.count() == 49);
}

TEST_CASE("ObservationMatrix needs two finite observations") {
  CHECK_THROWS_AS(ObservationMatrix(Eigen::MatrixXd::Ones(3, 1)), TooFewObservationsError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(2, 3);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(ObservationMatrix{bad}, DataError);
}

TEST_CASE("covariance worked values") {
  Eigen::MatrixXd two(2, 2);
  two << 0, 2, 0, 2;
  const SymMatrix c = compute_covariance(ObservationMatrix(two));
  CHECK(c(0, 0) == 2.0);
  CHECK(c(0, 1) == 2.0);
  CHECK(c(1, 0) == 2.0);
  CHECK(c(1, 1) == 2.0);

  Eigen::MatrixXd same(3, 6);
  same.colwise() = Eigen::Vector3d(1.5, -2.0, 7.0);
  CHECK(compute_covariance(ObservationMatrix(same)).values().isZero(0.0));
}

TEST_CASE("covariance matches the naive oracle on 50 observations in R^4") {
  Rng rng(42);
  const Eigen::MatrixXd x = rng.gaussian(4, 50);
  const SymMatrix c = compute_covariance(ObservationMatrix(x));
  const Eigen::MatrixXd o = naive_covariance(x);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(std::abs(c(i, j) - o(i, j)) <= 1e-12);
  }
  const SpdMatrix r = regularize(c, 1e-4);
  CHECK(sym_eig(r.matrix()).eigenvalues.minCoeff() >= 1e-4 * (1 - 1e-6));
}

TEST_CASE("covariance properties") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = rng.integer(1, 10);
    const int n = rng.integer(2, 40);
    const Eigen::MatrixXd x = rng.gaussian(m, n) * rng.uniform(0.1, 10.0);
    const Eigen::MatrixXd c = compute_covariance(ObservationMatrix(x)).values();
    CHECK(c == c.transpose());
    const double trace = c.trace();
    CHECK(sym_eig(SymMatrix(c)).eigenvalues.minCoeff() >= -1e-10 * trace);

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    Eigen::MatrixXd xp(m, n);
    for (int k = 0; k < n; ++k) xp.col(k) = x.col(perm[k]);
    CHECK((compute_covariance(ObservationMatrix(xp)).values() - c).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()));

    const Eigen::VectorXd shift = rng.gaussian(m, 1) * 5.0;
    const Eigen::MatrixXd xs = x.colwise() + shift;
    CHECK((compute_covariance(ObservationMatrix(xs)).values() - c).cwiseAbs().maxCoeff() <=
          1e-10 * std::max(1.0, c.cwiseAbs().maxCoeff()));

    const double k = rng.uniform(-3.0, 3.0);
    CHECK((compute_covariance(ObservationMatrix(k * x)).values() - k * k * c).cwiseAbs().maxCoeff() <=
          1e-12 * std::max(1.0, k * k * c.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("regularize worked values") {
  const SpdMatrix z = regularize(SymMatrix::zero(3), 1e-4);
  CHECK(z.values().isApprox(1e-4 * Eigen::MatrixXd::Identity(3, 3)));
  const SpdMatrix i = regularize(SymMatrix::identity(3), 1e-4);
  CHECK(i.values().isApprox(1.0001 * Eigen::MatrixXd::Identity(3, 3)));
  CHECK(i.min_eigenvalue_bound() == 1e-4);
}

TEST_CASE("regularize shifts every eigenvalue by epsilon") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int m = rng.integer(1, 12);
    const Eigen::MatrixXd x = rng.gaussian(m, rng.integer(2, 6));  // often rank deficient
    const SymMatrix c = compute_covariance(ObservationMatrix(x));
    const double eps = std::pow(10.0, rng.uniform(-6, -1));
    const SpdMatrix r = regularize(c, eps);
    const Eigen::VectorXd before = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c.values()).eigenvalues();
    const Eigen::VectorXd after =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(r.values()).eigenvalues();
    CHECK((after - before - Eigen::VectorXd::Constant(m, eps)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(r.values().isApprox(c.values() + eps * Eigen::MatrixXd::Identity(m, m)));
  }
}

TEST_CASE("regularize rejects bad input") {
  CHECK_THROWS_AS(regularize(SymMatrix::identity(2), 0.0), UsageError);
  Eigen::MatrixXd neg(2, 2);
  neg << 1, 0, 0, -1;
  CHECK_THROWS_AS(regularize(SymMatrix(neg), 1e-4), NotPsdError);
}
