#include "covspd/kernel.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "covspd/errors.hpp"
#include "covspd/tensorio.hpp"

namespace covspd {
namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw UsageError("kernel gamma must be positive");
}

void check_compatible(const LogDescriptor& a, const LogDescriptor& b) {
  if (a.region != b.region) {
    throw DataError("region mismatch: \"" + a.region + "\" vs \"" + b.region + "\"");
  }
  if (a.log.dim() != b.log.dim()) {
    throw DimensionMismatchError("descriptor dims differ: " + std::to_string(a.log.dim()) +
                                 " vs " + std::to_string(b.log.dim()));
  }
}

std::vector<std::string> ids_of(std::span<const LogDescriptor> d) {
  std::vector<std::string> ids;
  ids.reserve(d.size());
  for (const auto& x : d) ids.push_back(x.sample_id);
  return ids;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

}  // namespace

LogDescriptor make_log_descriptor(std::string sample_id, std::string region, const SpdMatrix& c) {
  return {std::move(sample_id), std::move(region), matrix_log(c)};
}

double rbf_from_squared_distance(double squared_distance, double gamma) {
  check_gamma(gamma);
  const double k = std::exp(-gamma * squared_distance);
  return std::max(k, std::numeric_limits<double>::min());
}

double rbf_kernel(const LogDescriptor& a, const LogDescriptor& b, double gamma) {
  check_gamma(gamma);
  check_compatible(a, b);
  return rbf_from_squared_distance(squared_log_euclidean_distance(a.log, b.log), gamma);
}

Eigen::MatrixXd squared_distance_matrix(std::span<const LogDescriptor> a,
                                        std::span<const LogDescriptor> b) {
  if (a.data() == b.data() && a.size() == b.size()) return squared_distance_matrix(a);
  Eigen::MatrixXd d2(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      check_compatible(a[i], b[j]);
      d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          squared_log_euclidean_distance(a[i].log, b[j].log);
    }
  }
  return d2;
}

Eigen::MatrixXd squared_distance_matrix(std::span<const LogDescriptor> a) {
  const auto n = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      check_compatible(a[i], a[j]);
      const double v = squared_log_euclidean_distance(a[i].log, a[j].log);
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

Eigen::MatrixXd kernel_from_squared_distances(const Eigen::MatrixXd& squared_distances,
                                              double gamma) {
  check_gamma(gamma);
  return squared_distances.unaryExpr(
      [gamma](double d2) { return rbf_from_squared_distance(d2, gamma); });
}

GramMatrix gram_matrix(std::span<const LogDescriptor> a, std::span<const LogDescriptor> b,
                       double gamma) {
  check_gamma(gamma);
  GramMatrix g{ids_of(a), ids_of(b),
               kernel_from_squared_distances(squared_distance_matrix(a, b), gamma), gamma, ""};
  if (!a.empty()) g.region = a.front().region;
  else if (!b.empty()) g.region = b.front().region;
  return g;
}

GramMatrix gram_matrix(std::span<const LogDescriptor> a, double gamma) {
  return gram_matrix(a, a, gamma);
}

double video_distance(std::span<const LogDescriptor> frames_a,
                      std::span<const LogDescriptor> frames_b, FramePairing pairing) {
  if (frames_a.empty() || frames_b.empty()) throw DataError("video_distance: empty frame list");
  double total = 0.0;
  if (pairing == FramePairing::kFrameMatched) {
    if (frames_a.size() != frames_b.size()) {
      throw DataError("frame-matched video distance needs equal frame counts");
    }
    for (std::size_t i = 0; i < frames_a.size(); ++i) {
      check_compatible(frames_a[i], frames_b[i]);
      total += log_euclidean_distance(frames_a[i].log, frames_b[i].log);
    }
    return total / static_cast<double>(frames_a.size());
  }
  for (const auto& fa : frames_a) {
    for (const auto& fb : frames_b) {
      check_compatible(fa, fb);
      total += log_euclidean_distance(fa.log, fb.log);
    }
  }
  return total / static_cast<double>(frames_a.size() * frames_b.size());
}

void save_gram(const GramMatrix& gram, const std::filesystem::path& path) {
  const auto rows = static_cast<std::uint32_t>(gram.values.rows());
  const auto cols = static_cast<std::uint32_t>(gram.values.cols());
  if (rows != gram.row_ids.size() || cols != gram.col_ids.size()) {
    throw DimensionMismatchError("gram ids do not match its values");
  }
  std::vector<float> data;
  data.reserve(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) {
      // Keep entries strictly positive after narrowing.
      data.push_back(std::max(static_cast<float>(gram.values(i, j)),
                              std::numeric_limits<float>::min()));
    }
  }
  save_feature_tensor(FeatureTensor(rows, cols, 1, std::move(data)), path);

  nlohmann::json side;
  side["rows"] = gram.row_ids;
  side["cols"] = gram.col_ids;
  side["gamma"] = gram.gamma;
  side["region"] = gram.region;
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write gram sidecar for " + path.string());
  out << side.dump(1) << '\n';
}

GramMatrix load_gram(const std::filesystem::path& path) {
  const FeatureTensor t = load_feature_tensor(path);
  if (t.width() != 1) throw DataError("gram container must have w = 1");
  std::ifstream in(sidecar_path(path));
  if (!in) throw IoError("missing gram sidecar for " + path.string());
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad gram sidecar: " + std::string(e.what()));
  }
  GramMatrix g;
  try {
    g.row_ids = side.at("rows").get<std::vector<std::string>>();
    g.col_ids = side.at("cols").get<std::vector<std::string>>();
    g.gamma = side.at("gamma").get<double>();
    g.region = side.at("region").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad gram sidecar: " + std::string(e.what()));
  }
  if (g.row_ids.size() != t.maps() || g.col_ids.size() != t.height()) {
    throw DimensionMismatchError("gram sidecar ids do not match container dims");
  }
  g.values.resize(t.maps(), t.height());
  for (std::uint32_t i = 0; i < t.maps(); ++i) {
    for (std::uint32_t j = 0; j < t.height(); ++j) g.values(i, j) = t.at(i, j, 0);
  }
  return g;
}

}  // namespace covspd
