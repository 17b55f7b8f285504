#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <iomanip>

#include "covspd/errors.hpp"
#include "covspd/pipeline.hpp"

namespace covspd {

namespace fs = std::filesystem;

namespace {

// Box-Muller over raw 53-bit uniforms keeps the stream independent of the
// standard library's distribution implementations.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Eigen::MatrixXd random_symmetric(NormalSource& normal, Eigen::Index m) {
  Eigen::MatrixXd a(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = normal.next() / std::sqrt(static_cast<double>(m));
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

// exp(a / 2) for symmetric a: a square root of exp(a).
Eigen::MatrixXd half_exp(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  const Eigen::VectorXd d = (0.5 * solver.eigenvalues().array()).exp();
  return solver.eigenvectors() * d.asDiagonal() * solver.eigenvectors().transpose();
}

std::string pad2(int v) {
  std::ostringstream s;
  s << std::setw(2) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

std::pair<DatasetManifest, std::vector<FeatureTensor>> synthesize_in_memory(const SynthConfig& c) {
  if (c.classes < 1 || c.subjects < 1 || c.videos_per_subject < 1 || c.frames < 1 || c.maps < 1 ||
      c.height < 1 || c.width < 1) {
    throw UsageError("synth: all counts must be at least 1");
  }
  if (!(c.separation >= 0.0) || !(c.subject_variation >= 0.0)) {
    throw UsageError("synth: separation and subject variation must be non-negative");
  }
  const auto m = static_cast<Eigen::Index>(c.maps);
  const auto n = static_cast<Eigen::Index>(c.height) * c.width;
  NormalSource normal(c.seed);

  std::vector<Eigen::MatrixXd> class_logs;
  for (int k = 0; k < c.classes; ++k) class_logs.push_back(random_symmetric(normal, m));
  std::vector<Eigen::MatrixXd> subject_logs;
  for (int s = 0; s < c.subjects; ++s) subject_logs.push_back(random_symmetric(normal, m));

  DatasetManifest manifest;
  for (int k = 0; k < c.classes; ++k) manifest.class_names.push_back("class" + std::to_string(k));
  manifest.input_extent = c.extent;
  const auto landmarks = frontal_landmark_template(c.extent);

  std::vector<FeatureTensor> tensors;
  for (int s = 0; s < c.subjects; ++s) {
    for (int k = 0; k < c.classes; ++k) {
      const Eigen::MatrixXd mix =
          half_exp(c.separation * class_logs[k] + c.subject_variation * subject_logs[s]);
      for (int v = 0; v < c.videos_per_subject; ++v) {
        const std::string video = "s" + pad2(s) + "_c" + std::to_string(k) + "_v" + std::to_string(v);
        for (int f = 0; f < c.frames; ++f) {
          Eigen::MatrixXd z(m, n);
          for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i < m; ++i) z(i, j) = normal.next();
          }
          const Eigen::MatrixXd obs = (mix * z).array() + 1.0;
          std::vector<float> data(static_cast<std::size_t>(m * n));
          for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) data[i * n + j] = static_cast<float>(obs(i, j));
          }
          tensors.emplace_back(c.maps, c.height, c.width, std::move(data));

          SampleRecord rec;
          rec.sample_id = video + "_f" + std::to_string(f);
          rec.tensor_path = fs::path("tensors") / (rec.sample_id + ".fmt1");
          rec.label = k;
          rec.subject_id = "s" + pad2(s);
          rec.video_id = video;
          rec.frame_index = f;
          rec.landmarks = landmarks;
          manifest.samples.push_back(std::move(rec));
        }
      }
    }
  }
  validate_manifest(manifest);
  return {std::move(manifest), std::move(tensors)};
}

DatasetManifest synthesize_dataset(const SynthConfig& config, const fs::path& dir) {
  auto [manifest, tensors] = synthesize_in_memory(config);
  std::error_code ec;
  fs::create_directories(dir / "tensors", ec);
  if (ec) throw IoError("cannot create " + (dir / "tensors").string() + ": " + ec.message());
  const fs::path root = fs::absolute(dir);
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    manifest.samples[i].tensor_path = root / manifest.samples[i].tensor_path;
    save_feature_tensor(tensors[i], manifest.samples[i].tensor_path);
  }
  save_dataset_manifest(manifest, root / "manifest.json");
  return manifest;
}

}  // namespace covspd
