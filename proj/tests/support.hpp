#pragma once

// Shared generators and independent reference implementations for the tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "covspd/diagnostics.hpp"
#include "covspd/kernel.hpp"
#include "covspd/spd.hpp"

namespace covspd::testing {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }

  Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd a(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) a(i, j) = normal();
    }
    return a;
  }

  Eigen::MatrixXd orthogonal(Eigen::Index m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(m, m));
    return qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  }

  Eigen::MatrixXd symmetric(Eigen::Index m) {
    const Eigen::MatrixXd a = gaussian(m, m);
    return 0.5 * (a + a.transpose());
  }

  /// Q diag(λ) Qᵀ with log-uniform eigenvalues spanning at most `condition`.
  Eigen::MatrixXd spd(Eigen::Index m, double condition = 1e3) {
    const Eigen::MatrixXd q = orthogonal(m);
    const double scale = std::exp(uniform(-3.0, 3.0));
    Eigen::VectorXd lambda(m);
    for (Eigen::Index i = 0; i < m; ++i) lambda(i) = scale * std::exp(uniform(0.0, std::log(condition)));
    Eigen::MatrixXd c = q * lambda.asDiagonal() * q.transpose();
    return 0.5 * (c + c.transpose());
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Covariance by explicit double loops, 1/(n-1) normalization.
inline Eigen::MatrixXd naive_covariance(const Eigen::MatrixXd& obs) {
  const Eigen::Index m = obs.rows();
  const Eigen::Index n = obs.cols();
  std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) mean[i] += obs(i, k);
    mean[i] /= static_cast<double>(n);
  }
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) s += (obs(i, k) - mean[i]) * (obs(j, k) - mean[j]);
      c(i, j) = s / static_cast<double>(n - 1);
    }
  }
  return c;
}

/// Padé scaling-and-squaring exponential from Eigen's unsupported module.
inline Eigen::MatrixXd matrix_exp(const Eigen::MatrixXd& a) { return a.exp(); }

inline LogDescriptor log_descriptor(const std::string& id, const Eigen::MatrixXd& spd,
                                    const std::string& region = "global") {
  return make_log_descriptor(id, region, SpdMatrix(SymMatrix(spd), std::numeric_limits<double>::min()));
}

/// Scalar bilinear sample with corner-aligned coordinates.
inline double bilinear_oracle(const std::vector<std::vector<double>>& img, int out_h, int out_w,
                              int r, int c) {
  const int in_h = static_cast<int>(img.size());
  const int in_w = static_cast<int>(img[0].size());
  const double y = out_h == 1 ? 0.0 : r * double(in_h - 1) / double(out_h - 1);
  const double x = out_w == 1 ? 0.0 : c * double(in_w - 1) / double(out_w - 1);
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, in_h - 1);
  const int x1 = std::min(x0 + 1, in_w - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  return (1 - fy) * ((1 - fx) * img[y0][x0] + fx * img[y0][x1]) +
         fy * ((1 - fx) * img[y1][x0] + fx * img[y1][x1]);
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture()
      : scope_([this](std::string_view m) { messages.emplace_back(m); }) {}
  std::vector<std::string> messages;

 private:
  ScopedWarningHandler scope_;
};

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("covspd_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace covspd::testing
