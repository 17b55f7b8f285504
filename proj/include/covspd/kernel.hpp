#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "covspd/spd.hpp"

namespace covspd {

/// Matrix log of one regularized descriptor, computed once and reused for
/// every distance involving it.
struct LogDescriptor {
  std::string sample_id;
  std::string region;
  SymMatrix log;
};

LogDescriptor make_log_descriptor(std::string sample_id, std::string region, const SpdMatrix& c);

struct GramMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Eigen::MatrixXd values;
  double gamma = 0.0;
  std::string region;
};

/// exp(-gamma * ||logA - logB||_F^2), clamped below to the smallest positive
/// normal double so entries stay in (0, 1].
double rbf_kernel(const LogDescriptor& a, const LogDescriptor& b, double gamma);

/// Kernel value from a squared distance, same clamping as rbf_kernel.
double rbf_from_squared_distance(double squared_distance, double gamma);

/// Cross Gram matrix. When `a` and `b` are the same object the result is
/// computed once per unordered pair and is exactly symmetric.
GramMatrix gram_matrix(std::span<const LogDescriptor> a, std::span<const LogDescriptor> b,
                       double gamma);

/// Square Gram matrix of one collection (exactly symmetric, unit diagonal).
GramMatrix gram_matrix(std::span<const LogDescriptor> a, double gamma);

/// Pairwise squared log-Euclidean distances between two collections.
Eigen::MatrixXd squared_distance_matrix(std::span<const LogDescriptor> a,
                                        std::span<const LogDescriptor> b);

/// Exactly symmetric squared distances within one collection, zero diagonal.
Eigen::MatrixXd squared_distance_matrix(std::span<const LogDescriptor> a);

/// Elementwise exp(-gamma * d2) with the rbf clamping.
Eigen::MatrixXd kernel_from_squared_distances(const Eigen::MatrixXd& squared_distances,
                                              double gamma);

enum class FramePairing {
  kAllPairs,      // mean over every cross pair of frames
  kFrameMatched,  // mean over frames at the same position (equal counts required)
};

/// Distance between two videos as the mean of frame-to-frame log-Euclidean
/// distances.
double video_distance(std::span<const LogDescriptor> frames_a,
                      std::span<const LogDescriptor> frames_b,
                      FramePairing pairing = FramePairing::kAllPairs);

/// Writes the Gram values as an FMT1 container (m = rows, h = cols, w = 1)
/// and a JSON sidecar at `path` + ".json" holding ids, gamma and region.
void save_gram(const GramMatrix& gram, const std::filesystem::path& path);
GramMatrix load_gram(const std::filesystem::path& path);

}  // namespace covspd
