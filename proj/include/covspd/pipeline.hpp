#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covspd/eval.hpp"
#include "covspd/fusion.hpp"
#include "covspd/kernel.hpp"
#include "covspd/region.hpp"
#include "covspd/svm.hpp"
#include "covspd/tensorio.hpp"

namespace covspd {

struct PipelineConfig {
  std::filesystem::path manifest;
  std::vector<std::string> regions{region_names::kGlobal};
  double epsilon = 1e-4;
  double ratio = 1.0 / 16.0;
  std::uint32_t resize_h = 14;
  std::uint32_t resize_w = 14;
  std::vector<double> gamma_grid = default_gamma_grid();
  std::vector<double> cost_grid = default_cost_grid();
  int folds = 10;
  std::uint64_t seed = 0;
  std::optional<FusionConfig> fusion;  // unset: weighted sum, weight 1 per region
  EvalUnit unit = EvalUnit::kFrame;
  FramePairing pairing = FramePairing::kAllPairs;
  bool strict = false;

  /// Throws UsageError unless epsilon > 0, ratio > 0, folds >= 2 and the
  /// region list is non-empty and duplicate free.
  void validate() const;
  FusionConfig effective_fusion() const;
};

/// Reads a JSON config; keys mirror the CLI flags ("manifest", "regions",
/// "epsilon", "ratio", "resize" [h, w], "gamma_grid", "cost_grid", "folds",
/// "seed", "fusion" (object or preset name), "unit", "pairing", "strict").
/// Missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// "oulu", "sfew", "oulu:product", ... or a path to a fusion JSON file.
FusionConfig parse_fusion_spec(const std::string& spec);

/// "global", "eyes", ..., or "all" for global plus the four facial regions.
std::vector<std::string> expand_regions(const std::vector<std::string>& names);

/// Descriptors of one sample, one per configured region.
struct SampleDescriptors {
  std::string sample_id;
  int label = 0;
  std::string subject_id;
  std::string video_id;
  int frame_index = 0;
  std::map<std::string, LogDescriptor> by_region;
};

/// Resize (for local regions), vectorize, covariance, regularize and log for
/// every configured region. Local regions come from the sample's region
/// boxes when present, otherwise from its landmarks.
SampleDescriptors compute_sample_descriptors(const FeatureTensor& tensor, const SampleRecord& record,
                                             ImageExtent extent, const PipelineConfig& config);

/// In-memory collection of descriptors plus the settings that produced them.
struct DescriptorStore {
  std::vector<std::string> class_names;
  std::vector<std::string> regions;
  double epsilon = 0.0;
  double ratio = 0.0;
  std::uint32_t resize_h = 0;
  std::uint32_t resize_w = 0;
  std::vector<SampleDescriptors> samples;
  std::vector<std::string> skipped;  // "sample_id: reason"
};

/// Extracts descriptors for every manifest sample. Per-sample failures are
/// warned about and skipped; with config.strict the first failure is
/// rethrown.
DescriptorStore extract_descriptors(const DatasetManifest& manifest, const PipelineConfig& config);

/// Store layout: `<dir>/store.json` index plus one FMT1 file per descriptor
/// (m = h = dim, w = 1, float32 matrix-log payload).
void save_descriptor_store(const DescriptorStore& store, const std::filesystem::path& dir);
DescriptorStore load_descriptor_store(const std::filesystem::path& dir);

/// Classification units (frames or videos) built from store samples.
struct UnitSet {
  EvalUnit unit = EvalUnit::kFrame;
  std::vector<std::string> ids;  // sample_id or video_id
  std::vector<int> labels;
  std::vector<std::string> subjects;
  std::vector<std::vector<std::size_t>> members;  // store sample indices, by frame index
};

UnitSet make_units(const DescriptorStore& store, EvalUnit unit);

/// Squared unit distances for one region: squared log-Euclidean distance for
/// frames, squared mean frame distance for videos.
Eigen::MatrixXd unit_squared_distances(const DescriptorStore& store_a, const UnitSet& a,
                                       const DescriptorStore& store_b, const UnitSet& b,
                                       const std::string& region, FramePairing pairing);

/// Exactly symmetric variant for one unit set.
Eigen::MatrixXd unit_squared_distances(const DescriptorStore& store, const UnitSet& units,
                                       const std::string& region, FramePairing pairing);

struct RegionModel {
  SvmModel model;
  GridSearchResult grid;
};

struct ModelBundle {
  EvalUnit unit = EvalUnit::kFrame;
  FramePairing pairing = FramePairing::kAllPairs;
  std::filesystem::path train_store;
  std::vector<std::string> class_names;
  FusionConfig fusion;
  std::map<std::string, RegionModel> regions;
};

/// Per-region grid search then final training on all units.
ModelBundle train_bundle(const DescriptorStore& store, const PipelineConfig& config);

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

struct UnitPrediction {
  std::string id;
  int truth = -1;
  int predicted = -1;
  std::string video_id;  // frame unit only
  int frame_index = 0;   // frame unit only
  ClassScores fused;
  std::map<std::string, ClassScores> region_scores;
};

struct PredictionSet {
  EvalUnit unit = EvalUnit::kFrame;
  std::vector<std::string> class_names;
  std::vector<UnitPrediction> predictions;
};

/// Scores every test unit with each region's model and fuses. Regions in
/// the test store but not in the bundle are ignored with a warning; bundle
/// regions missing from the test store raise DataError.
PredictionSet predict(const ModelBundle& bundle, const DescriptorStore& train_store,
                      const DescriptorStore& test_store);

nlohmann::json predictions_to_json(const PredictionSet& set);
PredictionSet predictions_from_json(const nlohmann::json& j);

enum class VideoRule { kNone, kAllFrames };

/// Report for a prediction set. kAllFrames applies the strict all-frames
/// video rule to frame predictions.
EvalReport evaluate_predictions(const PredictionSet& set, VideoRule rule = VideoRule::kNone);

struct CrossValidationResult {
  EvalReport report;
  std::vector<double> fold_accuracy;  // percent
  std::vector<std::map<std::string, std::pair<double, double>>> chosen;  // region -> (gamma, cost)
};

/// Nested subject-independent cross-validation: outer folds for testing,
/// grid search on each training split, fused predictions on the held-out
/// subjects.
CrossValidationResult cross_validate(const DescriptorStore& store, const PipelineConfig& config);

struct SynthConfig {
  int classes = 3;
  int subjects = 10;
  int videos_per_subject = 2;  // per class
  int frames = 3;
  std::uint32_t maps = 8;
  std::uint32_t height = 7;
  std::uint32_t width = 7;
  std::uint64_t seed = 0;
  double separation = 0.5;
  double subject_variation = 0.3;
  ImageExtent extent{224, 224};
};

/// Writes class-conditional Gaussian tensors and a manifest into `dir`.
/// Observations of class c are drawn as exp((sep*S_c + subj*T_s)/2) z + 1 with
/// z standard normal, so covariance descriptors separate by class when
/// separation > 0. Returns the manifest (tensor paths absolute).
DatasetManifest synthesize_dataset(const SynthConfig& config, const std::filesystem::path& dir);

/// Same generator, tensors kept in memory (index-aligned with the returned
/// manifest samples).
std::pair<DatasetManifest, std::vector<FeatureTensor>> synthesize_in_memory(const SynthConfig& config);

/// Extraction on in-memory tensors, same per-sample failure rules.
DescriptorStore extract_descriptors(const DatasetManifest& manifest,
                                    const std::vector<FeatureTensor>& tensors,
                                    const PipelineConfig& config);

}  // namespace covspd
