#include "covspd/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "covspd/errors.hpp"

namespace covspd {

int FoldAssignment::fold(const std::string& subject) const {
  auto it = fold_of.find(subject);
  if (it == fold_of.end()) throw DataError("subject \"" + subject + "\" has no fold");
  return it->second;
}

std::vector<std::string> FoldAssignment::subjects_in(int f) const {
  std::vector<std::string> out;
  for (const auto& [subject, fold] : fold_of) {
    if (fold == f) out.push_back(subject);
  }
  return out;
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

FoldAssignment make_folds(std::span<const std::string> subject_ids, int k, std::uint64_t seed) {
  if (k < 2) throw UsageError("fold count must be at least 2");
  const std::set<std::string> distinct(subject_ids.begin(), subject_ids.end());
  if (distinct.size() < static_cast<std::size_t>(k)) {
    throw DataError("only " + std::to_string(distinct.size()) + " subjects for " +
                    std::to_string(k) + " folds");
  }
  const std::vector<std::string> subjects(distinct.begin(), distinct.end());
  const auto perm = seeded_permutation(subjects.size(), seed);
  FoldAssignment out{k, seed, {}};
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.fold_of[subjects[perm[i]]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return out;
}

FoldAssignment make_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  std::vector<std::string> subjects;
  subjects.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) subjects.push_back(s.subject_id);
  return make_folds(subjects, k, seed);
}

std::string to_string(EvalUnit unit) { return unit == EvalUnit::kFrame ? "frame" : "video"; }

EvalUnit eval_unit_from_string(const std::string& s) {
  if (s == "frame") return EvalUnit::kFrame;
  if (s == "video") return EvalUnit::kVideo;
  throw UsageError("unknown unit \"" + s + "\" (expected frame or video)");
}

EvalReport make_report(std::span<const std::pair<int, int>> truth_predicted,
                       std::vector<std::string> class_names, EvalUnit unit) {
  const std::size_t k = class_names.size();
  EvalReport r;
  r.unit = unit;
  r.class_names = std::move(class_names);
  r.confusion.assign(k, std::vector<long>(k, 0));
  for (const auto& [truth, predicted] : truth_predicted) {
    if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= k ||
        static_cast<std::size_t>(predicted) >= k) {
      throw DataError("class index out of range in evaluation");
    }
    ++r.confusion[truth][predicted];
  }
  long correct = 0;
  r.per_class_recall.resize(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const long row = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), 0L);
    r.total += row;
    correct += r.confusion[c][c];
    r.per_class_recall[c] = row > 0 ? 100.0 * r.confusion[c][c] / row : 0.0;
  }
  r.overall_accuracy = r.total > 0 ? 100.0 * correct / r.total : 0.0;
  return r;
}

EvalReport evaluate_video(const std::map<std::string, int>& predictions,
                          const std::map<std::string, int>& truth,
                          std::vector<std::string> class_names) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(truth.size());
  for (const auto& [video, label] : truth) {
    auto it = predictions.find(video);
    if (it == predictions.end()) throw DataError("no prediction for video \"" + video + "\"");
    pairs.emplace_back(label, it->second);
  }
  return make_report(pairs, std::move(class_names), EvalUnit::kVideo);
}

EvalReport softmax_video_rule(const std::map<FrameKey, int>& frame_predictions,
                              const std::map<FrameKey, int>& truth,
                              std::vector<std::string> class_names) {
  struct VideoTally {
    int label = -1;
    bool all_correct = true;
    std::map<int, int> wrong_votes;
  };
  std::map<std::string, VideoTally> videos;
  for (const auto& [key, label] : truth) {
    auto it = frame_predictions.find(key);
    if (it == frame_predictions.end()) {
      throw DataError("missing prediction for frame " + std::to_string(key.second) +
                      " of video \"" + key.first + "\"");
    }
    VideoTally& v = videos[key.first];
    if (v.label >= 0 && v.label != label) {
      throw DataError("frames of video \"" + key.first + "\" carry different labels");
    }
    v.label = label;
    if (it->second != label) {
      v.all_correct = false;
      ++v.wrong_votes[it->second];
    }
  }
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(videos.size());
  for (const auto& [id, v] : videos) {
    if (v.all_correct) {
      pairs.emplace_back(v.label, v.label);
      continue;
    }
    // std::map iterates ascending, so max_element keeps the lowest class.
    auto best = std::max_element(v.wrong_votes.begin(), v.wrong_votes.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    pairs.emplace_back(v.label, best->first);
  }
  return make_report(pairs, std::move(class_names), EvalUnit::kVideo);
}

nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["unit"] = to_string(r.unit);
  j["class_names"] = r.class_names;
  j["overall_accuracy"] = r.overall_accuracy;
  j["per_class_recall"] = r.per_class_recall;
  j["confusion"] = r.confusion;
  j["total"] = r.total;
  return j;
}

std::string report_to_table(const EvalReport& r) {
  std::size_t name_width = 5;
  for (const auto& n : r.class_names) name_width = std::max(name_width, n.size());
  std::size_t cell = 6;
  for (const auto& n : r.class_names) cell = std::max(cell, n.size() + 1);

  std::ostringstream out;
  out << "unit: " << to_string(r.unit) << "  total: " << r.total << "  accuracy: " << std::fixed
      << std::setprecision(2) << r.overall_accuracy << "%\n";
  out << std::left << std::setw(static_cast<int>(name_width)) << "truth" << std::right;
  for (const auto& n : r.class_names) out << std::setw(static_cast<int>(cell)) << n;
  out << std::setw(9) << "recall" << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << std::left << std::setw(static_cast<int>(name_width)) << r.class_names[c] << std::right;
    for (long v : r.confusion[c]) out << std::setw(static_cast<int>(cell)) << v;
    out << std::setw(8) << r.per_class_recall[c] << "%\n";
  }
  return out.str();
}

std::string confusion_to_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "truth";
  for (const auto& n : r.class_names) out << ',' << n;
  out << '\n';
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    out << r.class_names[c];
    for (long v : r.confusion[c]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace covspd
