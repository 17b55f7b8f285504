#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "covspd/diagnostics.hpp"
#include "covspd/errors.hpp"
#include "covspd/pipeline.hpp"

namespace covspd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string to_string(FramePairing p) {
  return p == FramePairing::kAllPairs ? "all_pairs" : "frame_matched";
}

FramePairing pairing_from_string(const std::string& s) {
  if (s == "all_pairs") return FramePairing::kAllPairs;
  if (s == "frame_matched") return FramePairing::kFrameMatched;
  throw DataError("unknown frame pairing \"" + s + "\"");
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, std::span<const std::size_t> rows,
                          std::span<const std::size_t> cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          m(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
    }
  }
  return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

SvmModel fit_model(const Eigen::MatrixXd& squared_distances, const std::vector<std::string>& ids,
                   const std::vector<int>& labels, double gamma, double cost,
                   const std::string& region, int num_classes) {
  GramMatrix g{ids, ids, kernel_from_squared_distances(squared_distances, gamma), gamma, region};
  return train_multiclass(g, labels, cost, num_classes);
}

/// Scores one unit given its squared distances to training units listed in
/// `train_ids` (any order).
ClassScores score_unit(const SvmModel& model, const Eigen::RowVectorXd& d2_row,
                       const std::map<std::string, std::size_t>& column_of) {
  std::vector<double> row(model.training_ids.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    auto it = column_of.find(model.training_ids[c]);
    if (it == column_of.end()) {
      throw DataError("training unit \"" + model.training_ids[c] + "\" not found");
    }
    row[c] = rbf_from_squared_distance(d2_row(static_cast<Eigen::Index>(it->second)), model.gamma);
  }
  return predict_scores(model, row);
}

std::map<std::string, std::size_t> index_of(const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], i);
  return out;
}

json grid_to_json(const GridSearchResult& g) {
  json table = json::array();
  for (const auto& c : g.table) {
    json jc{{"gamma", c.gamma}, {"cost", c.cost}, {"mean_accuracy", c.mean_accuracy},
            {"fold_accuracy", c.fold_accuracy}, {"failed", c.failed}};
    if (!c.message.empty()) jc["message"] = c.message;
    table.push_back(std::move(jc));
  }
  return {{"best_gamma", g.best_gamma}, {"best_cost", g.best_cost},
          {"best_accuracy", g.best_accuracy}, {"table", std::move(table)}};
}

GridSearchResult grid_from_json(const json& j) {
  GridSearchResult g;
  g.best_gamma = j.at("best_gamma").get<double>();
  g.best_cost = j.at("best_cost").get<double>();
  g.best_accuracy = j.at("best_accuracy").get<double>();
  for (const auto& jc : j.at("table")) {
    GridCell c;
    c.gamma = jc.at("gamma").get<double>();
    c.cost = jc.at("cost").get<double>();
    c.mean_accuracy = jc.at("mean_accuracy").get<double>();
    c.fold_accuracy = jc.at("fold_accuracy").get<std::vector<double>>();
    c.failed = jc.at("failed").get<bool>();
    c.message = jc.value("message", "");
    g.table.push_back(std::move(c));
  }
  return g;
}

}  // namespace

ModelBundle train_bundle(const DescriptorStore& store, const PipelineConfig& config) {
  config.validate();
  if (store.samples.empty()) throw DataError("training store is empty");
  const UnitSet units = make_units(store, config.unit);
  ModelBundle bundle;
  bundle.unit = config.unit;
  bundle.pairing = config.pairing;
  bundle.class_names = store.class_names;
  bundle.fusion = config.effective_fusion();
  const int k = static_cast<int>(store.class_names.size());
  for (const auto& region : config.regions) {
    GridSearchData data{units.ids, units.labels, units.subjects,
                        unit_squared_distances(store, units, region, config.pairing), region, k};
    GridSearchResult grid = grid_search(data, config.gamma_grid, config.cost_grid, config.folds, config.seed);
    SvmModel model = fit_model(data.squared_distances, units.ids, units.labels, grid.best_gamma,
                               grid.best_cost, region, k);
    bundle.regions.emplace(region, RegionModel{std::move(model), std::move(grid)});
  }
  return bundle;
}

void save_bundle(const ModelBundle& bundle, const fs::path& path) {
  json j;
  j["unit"] = to_string(bundle.unit);
  j["pairing"] = to_string(bundle.pairing);
  j["train_store"] = bundle.train_store.empty() ? "" : fs::absolute(bundle.train_store).string();
  j["class_names"] = bundle.class_names;
  j["fusion"] = fusion_to_json(bundle.fusion);
  json regions = json::object();
  for (const auto& [name, rm] : bundle.regions) {
    regions[name] = {{"model", model_to_json(rm.model)}, {"grid", grid_to_json(rm.grid)}};
  }
  j["regions"] = std::move(regions);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write bundle " + path.string());
  out << j.dump(1) << '\n';
}

ModelBundle load_bundle(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open bundle " + path.string());
  try {
    const json j = json::parse(in);
    ModelBundle b;
    b.unit = eval_unit_from_string(j.at("unit").get<std::string>());
    b.pairing = pairing_from_string(j.at("pairing").get<std::string>());
    b.train_store = j.at("train_store").get<std::string>();
    b.class_names = j.at("class_names").get<std::vector<std::string>>();
    b.fusion = fusion_from_json(j.at("fusion"));
    for (const auto& [name, jr] : j.at("regions").items()) {
      b.regions.emplace(name, RegionModel{model_from_json(jr.at("model")), grid_from_json(jr.at("grid"))});
    }
    if (b.regions.empty()) throw DataError("bundle holds no region models");
    return b;
  } catch (const json::exception& e) {
    throw DataError("malformed bundle: " + std::string(e.what()));
  }
}

PredictionSet predict(const ModelBundle& bundle, const DescriptorStore& train_store,
                      const DescriptorStore& test_store) {
  const std::set<std::string> test_regions(test_store.regions.begin(), test_store.regions.end());
  for (const auto& [region, rm] : bundle.regions) {
    if (!test_regions.contains(region)) {
      throw DataError("bundle region \"" + region + "\" missing from the test store");
    }
  }
  for (const auto& r : test_store.regions) {
    if (!bundle.regions.contains(r)) warn("bundle has no model for region \"" + r + "\"; ignoring it");
  }
  FusionConfig fusion = bundle.fusion;
  if (fusion.method == FusionMethod::kWeightedSum) {
    std::erase_if(fusion.weights, [&](const auto& kv) {
      if (bundle.regions.contains(kv.first)) return false;
      warn("fusion weight for \"" + kv.first + "\" has no model; dropped");
      return true;
    });
  }

  const UnitSet train_units = make_units(train_store, bundle.unit);
  const UnitSet test_units = make_units(test_store, bundle.unit);
  const auto column_of = index_of(train_units.ids);

  PredictionSet set;
  set.unit = bundle.unit;
  set.class_names = bundle.class_names;
  set.predictions.resize(test_units.ids.size());
  for (const auto& [region, rm] : bundle.regions) {
    const Eigen::MatrixXd d2 =
        unit_squared_distances(test_store, test_units, train_store, train_units, region, bundle.pairing);
    for (std::size_t u = 0; u < test_units.ids.size(); ++u) {
      set.predictions[u].region_scores.emplace(
          region, score_unit(rm.model, d2.row(static_cast<Eigen::Index>(u)), column_of));
    }
  }
  for (std::size_t u = 0; u < test_units.ids.size(); ++u) {
    UnitPrediction& p = set.predictions[u];
    p.id = test_units.ids[u];
    p.truth = test_units.labels[u];
    if (bundle.unit == EvalUnit::kFrame) {
      const auto& s = test_store.samples[test_units.members[u].front()];
      p.video_id = s.video_id;
      p.frame_index = s.frame_index;
    }
    FusionResult fused = fuse(p.region_scores, fusion);
    p.fused = std::move(fused.scores);
    p.predicted = fused.predicted;
  }
  return set;
}

json predictions_to_json(const PredictionSet& set) {
  json preds = json::array();
  for (const auto& p : set.predictions) {
    json jp{{"id", p.id}, {"truth", p.truth}, {"predicted", p.predicted}, {"scores", p.fused.values}};
    if (set.unit == EvalUnit::kFrame) {
      jp["video_id"] = p.video_id;
      jp["frame_index"] = p.frame_index;
    }
    json rs = json::object();
    for (const auto& [region, s] : p.region_scores) rs[region] = s.values;
    jp["region_scores"] = std::move(rs);
    preds.push_back(std::move(jp));
  }
  return {{"unit", to_string(set.unit)}, {"class_names", set.class_names}, {"predictions", std::move(preds)}};
}

PredictionSet predictions_from_json(const json& j) {
  try {
    PredictionSet set;
    set.unit = eval_unit_from_string(j.at("unit").get<std::string>());
    set.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& jp : j.at("predictions")) {
      UnitPrediction p;
      p.id = jp.at("id").get<std::string>();
      p.truth = jp.at("truth").get<int>();
      p.predicted = jp.at("predicted").get<int>();
      p.fused.values = jp.at("scores").get<std::vector<double>>();
      p.video_id = jp.value("video_id", "");
      p.frame_index = jp.value("frame_index", 0);
      if (jp.contains("region_scores")) {
        for (const auto& [region, s] : jp.at("region_scores").items()) {
          p.region_scores.emplace(region, ClassScores{s.get<std::vector<double>>()});
        }
      }
      set.predictions.push_back(std::move(p));
    }
    return set;
  } catch (const json::exception& e) {
    throw DataError("malformed predictions file: " + std::string(e.what()));
  }
}

EvalReport evaluate_predictions(const PredictionSet& set, VideoRule rule) {
  if (rule == VideoRule::kAllFrames) {
    if (set.unit != EvalUnit::kFrame) throw UsageError("the all-frames rule needs frame predictions");
    std::map<FrameKey, int> predicted, truth;
    for (const auto& p : set.predictions) {
      const FrameKey key{p.video_id, p.frame_index};
      predicted[key] = p.predicted;
      truth[key] = p.truth;
    }
    return softmax_video_rule(predicted, truth, set.class_names);
  }
  if (set.unit == EvalUnit::kVideo) {
    std::map<std::string, int> predicted, truth;
    for (const auto& p : set.predictions) {
      predicted[p.id] = p.predicted;
      truth[p.id] = p.truth;
    }
    return evaluate_video(predicted, truth, set.class_names);
  }
  std::vector<std::pair<int, int>> pairs;
  for (const auto& p : set.predictions) pairs.emplace_back(p.truth, p.predicted);
  return make_report(pairs, set.class_names, EvalUnit::kFrame);
}

CrossValidationResult cross_validate(const DescriptorStore& store, const PipelineConfig& config) {
  config.validate();
  if (store.samples.empty()) throw DataError("store is empty");
  const UnitSet units = make_units(store, config.unit);
  const int k = static_cast<int>(store.class_names.size());
  const FusionConfig fusion = config.effective_fusion();

  std::map<std::string, Eigen::MatrixXd> d2;
  for (const auto& region : config.regions) {
    d2.emplace(region, unit_squared_distances(store, units, region, config.pairing));
  }

  const FoldAssignment outer = make_folds(units.subjects, config.folds, config.seed);
  CrossValidationResult result;
  std::vector<std::pair<int, int>> pairs;
  for (int f = 0; f < config.folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t u = 0; u < units.ids.size(); ++u) {
      (outer.fold(units.subjects[u]) == f ? test : train).push_back(u);
    }
    const auto train_ids = pick(units.ids, train);
    const auto train_labels = pick(units.labels, train);
    const auto train_subjects = pick(units.subjects, train);
    const std::set<std::string> distinct(train_subjects.begin(), train_subjects.end());
    const int inner_folds = std::min<int>(config.folds, static_cast<int>(distinct.size()));
    const auto column_of = index_of(train_ids);

    std::vector<std::map<std::string, ClassScores>> scores(test.size());
    std::map<std::string, std::pair<double, double>> chosen;
    for (const auto& region : config.regions) {
      const Eigen::MatrixXd& all = d2.at(region);
      GridSearchData data{train_ids, train_labels, train_subjects, submatrix(all, train, train), region, k};
      const GridSearchResult grid =
          grid_search(data, config.gamma_grid, config.cost_grid, inner_folds, config.seed);
      chosen[region] = {grid.best_gamma, grid.best_cost};
      const SvmModel model = fit_model(data.squared_distances, train_ids, train_labels,
                                       grid.best_gamma, grid.best_cost, region, k);
      const Eigen::MatrixXd cross = submatrix(all, test, train);
      for (std::size_t t = 0; t < test.size(); ++t) {
        scores[t].emplace(region, score_unit(model, cross.row(static_cast<Eigen::Index>(t)), column_of));
      }
    }
    std::size_t correct = 0;
    for (std::size_t t = 0; t < test.size(); ++t) {
      const int predicted = fuse(scores[t], fusion).predicted;
      pairs.emplace_back(units.labels[test[t]], predicted);
      if (predicted == units.labels[test[t]]) ++correct;
    }
    result.fold_accuracy.push_back(test.empty() ? 0.0 : 100.0 * correct / test.size());
    result.chosen.push_back(std::move(chosen));
  }
  result.report = make_report(pairs, store.class_names, config.unit);
  return result;
}

}  // namespace covspd
