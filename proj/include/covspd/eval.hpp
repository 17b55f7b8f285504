#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "covspd/tensorio.hpp"

namespace covspd {

struct FoldAssignment {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> fold_of;  // subject_id -> fold

  int fold(const std::string& subject) const;
  /// Subjects of fold f, ascending.
  std::vector<std::string> subjects_in(int f) const;
};

/// Shuffles the distinct subjects with a seeded generator and deals them
/// round-robin into k folds. Throws DataError when there are fewer subjects
/// than folds, UsageError when k < 2.
FoldAssignment make_folds(std::span<const std::string> subject_ids, int k, std::uint64_t seed);
FoldAssignment make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed);

/// Fisher-Yates permutation of 0..n-1 driven by std::mt19937_64, without the
/// standard library's implementation-defined distributions.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

enum class EvalUnit { kFrame, kVideo };
std::string to_string(EvalUnit unit);
EvalUnit eval_unit_from_string(const std::string& s);

struct EvalReport {
  EvalUnit unit = EvalUnit::kFrame;
  std::vector<std::string> class_names;
  std::vector<std::vector<long>> confusion;  // rows = truth, cols = predicted
  std::vector<double> per_class_recall;      // percent; NaN-free, 0 for empty rows
  double overall_accuracy = 0.0;             // percent
  long total = 0;
};

/// Builds a report from (truth, predicted) pairs.
EvalReport make_report(std::span<const std::pair<int, int>> truth_predicted,
                       std::vector<std::string> class_names, EvalUnit unit);

/// One prediction per video. Throws DataError if any truth video lacks a
/// prediction.
EvalReport evaluate_video(const std::map<std::string, int>& predictions,
                          const std::map<std::string, int>& truth,
                          std::vector<std::string> class_names);

using FrameKey = std::pair<std::string, int>;  // (video_id, frame_index)

/// A video is correct only if every one of its frames is. Wrong videos are
/// booked under their most frequent wrong frame prediction (lowest class on
/// ties). Throws DataError on missing frames or frames of one video with
/// different truth labels.
EvalReport softmax_video_rule(const std::map<FrameKey, int>& frame_predictions,
                              const std::map<FrameKey, int>& truth,
                              std::vector<std::string> class_names);

nlohmann::json report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);
std::string confusion_to_csv(const EvalReport& report);

}  // namespace covspd
