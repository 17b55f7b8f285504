// covspd: covariance-descriptor / log-Euclidean SVM pipeline driver.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "covspd/errors.hpp"
#include "covspd/pipeline.hpp"

namespace fs = std::filesystem;
using namespace covspd;

namespace {

struct Options {
  std::string manifest;
  std::string store;
  std::string config;
  std::string model;
  std::string predictions;
  std::vector<std::string> regions;
  std::optional<double> epsilon;
  std::optional<double> ratio;
  std::vector<std::uint32_t> resize;
  std::vector<double> gamma_grid;
  std::vector<double> cost_grid;
  std::optional<int> folds;
  std::optional<std::uint64_t> seed;
  std::string fusion;
  std::string unit;
  std::string pairing;
  std::string rule = "none";
  std::string csv;
  bool strict = false;
  std::string out;

  SynthConfig synth;
};

PipelineConfig build_config(const Options& o) {
  PipelineConfig c = o.config.empty() ? PipelineConfig{} : load_pipeline_config(o.config);
  if (!o.manifest.empty()) c.manifest = o.manifest;
  if (!o.regions.empty()) c.regions = expand_regions(o.regions);
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.ratio) c.ratio = *o.ratio;
  if (!o.resize.empty()) {
    if (o.resize.size() != 2) throw UsageError("--resize takes H,W");
    c.resize_h = o.resize[0];
    c.resize_w = o.resize[1];
  }
  if (!o.gamma_grid.empty()) c.gamma_grid = o.gamma_grid;
  if (!o.cost_grid.empty()) c.cost_grid = o.cost_grid;
  if (o.folds) c.folds = *o.folds;
  if (o.seed) c.seed = *o.seed;
  if (!o.fusion.empty()) c.fusion = parse_fusion_spec(o.fusion);
  if (!o.unit.empty()) c.unit = eval_unit_from_string(o.unit);
  if (!o.pairing.empty()) {
    if (o.pairing == "all_pairs") c.pairing = FramePairing::kAllPairs;
    else if (o.pairing == "frame_matched") c.pairing = FramePairing::kFrameMatched;
    else throw UsageError("--pairing must be all_pairs or frame_matched");
  }
  c.strict = c.strict || o.strict;
  c.validate();
  return c;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

int run_synth(const Options& o) {
  require(o.out, "--out");
  SynthConfig s = o.synth;
  if (o.seed) s.seed = *o.seed;
  const DatasetManifest m = synthesize_dataset(s, o.out);
  std::cout << "wrote " << m.samples.size() << " tensors and " << (fs::path(o.out) / "manifest.json").string()
            << '\n';
  return 0;
}

int run_extract(const Options& o) {
  const PipelineConfig c = build_config(o);
  require(c.manifest.string(), "--manifest");
  require(o.store, "--store");
  const DatasetManifest manifest = load_dataset_manifest(c.manifest);
  const DescriptorStore store = extract_descriptors(manifest, c);
  save_descriptor_store(store, o.store);
  std::cout << "extracted " << store.samples.size() << " samples x " << store.regions.size()
            << " regions, skipped " << store.skipped.size() << '\n';
  return 0;
}

int run_gram(const Options& o) {
  const PipelineConfig c = build_config(o);
  require(o.store, "--store");
  require(o.out, "--out");
  if (c.regions.size() != 1) throw UsageError("gram needs exactly one region");
  if (o.gamma_grid.size() != 1) throw UsageError("gram needs exactly one --gamma-grid value");
  const DescriptorStore store = load_descriptor_store(o.store);
  const UnitSet units = make_units(store, c.unit);
  const double gamma = o.gamma_grid.front();
  GramMatrix g{units.ids, units.ids,
               kernel_from_squared_distances(unit_squared_distances(store, units, c.regions.front(), c.pairing), gamma),
               gamma, c.regions.front()};
  save_gram(g, o.out);
  std::cout << "wrote " << g.values.rows() << "x" << g.values.cols() << " gram to " << o.out << '\n';
  return 0;
}

int run_train(const Options& o) {
  const PipelineConfig c = build_config(o);
  require(o.store, "--store");
  require(o.out, "--out");
  const DescriptorStore store = load_descriptor_store(o.store);
  ModelBundle bundle = train_bundle(store, c);
  bundle.train_store = fs::absolute(o.store);
  save_bundle(bundle, o.out);
  for (const auto& [region, rm] : bundle.regions) {
    std::cout << region << ": gamma " << rm.grid.best_gamma << " cost " << rm.grid.best_cost
              << " cv accuracy " << 100.0 * rm.grid.best_accuracy << "%\n";
  }
  return 0;
}

int run_predict(const Options& o) {
  require(o.model, "--model");
  require(o.store, "--store");
  require(o.out, "--out");
  const ModelBundle bundle = load_bundle(o.model);
  if (!o.unit.empty() && eval_unit_from_string(o.unit) != bundle.unit) {
    throw UsageError("--unit " + o.unit + " differs from the bundle's training unit " +
                     to_string(bundle.unit));
  }
  const DescriptorStore train = load_descriptor_store(bundle.train_store);
  const DescriptorStore test = load_descriptor_store(o.store);
  const PredictionSet set = predict(bundle, train, test);
  write_text(o.out, predictions_to_json(set).dump(1) + "\n");
  std::cout << "wrote " << set.predictions.size() << " " << to_string(set.unit) << " predictions\n";
  return 0;
}

int run_evaluate(const Options& o) {
  EvalReport report;
  if (!o.predictions.empty()) {
    std::ifstream in(o.predictions);
    if (!in) throw IoError("cannot open " + o.predictions);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("predictions file is not valid JSON: " + std::string(e.what()));
    }
    VideoRule rule = VideoRule::kNone;
    if (o.rule == "all-frames") rule = VideoRule::kAllFrames;
    else if (o.rule != "none") throw UsageError("--rule must be none or all-frames");
    report = evaluate_predictions(predictions_from_json(j), rule);
  } else {
    require(o.store, "--store (or --predictions)");
    const PipelineConfig c = build_config(o);
    const CrossValidationResult cv = cross_validate(load_descriptor_store(o.store), c);
    report = cv.report;
    for (std::size_t f = 0; f < cv.fold_accuracy.size(); ++f) {
      std::cout << "fold " << f << ": " << cv.fold_accuracy[f] << "%\n";
    }
  }
  std::cout << report_to_table(report);
  if (!o.out.empty()) write_text(o.out, report_to_json(report).dump(1) + "\n");
  if (!o.csv.empty()) write_text(o.csv, confusion_to_csv(report));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance descriptors on the SPD manifold with log-Euclidean kernel SVMs"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON pipeline config (flags override it)");
    cmd->add_option("--regions", o.regions, "global, eyes, mouth, cheek_left, cheek_right or all")
        ->delimiter(',');
    cmd->add_option("--unit", o.unit, "frame or video");
    cmd->add_option("--pairing", o.pairing, "all_pairs (default) or frame_matched");
    cmd->add_option("--seed", o.seed, "random seed");
  };
  auto add_training = [&](CLI::App* cmd) {
    cmd->add_option("--gamma-grid", o.gamma_grid, "comma separated gamma values")->delimiter(',');
    cmd->add_option("--cost-grid", o.cost_grid, "comma separated cost values")->delimiter(',');
    cmd->add_option("--folds", o.folds, "subject-independent folds");
    cmd->add_option("--fusion", o.fusion, "oulu, sfew, <preset>:product or a fusion JSON file");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--classes", o.synth.classes);
  synth->add_option("--subjects", o.synth.subjects);
  synth->add_option("--videos", o.synth.videos_per_subject, "videos per subject and class");
  synth->add_option("--frames", o.synth.frames, "frames per video");
  synth->add_option("--maps", o.synth.maps);
  synth->add_option("--height", o.synth.height);
  synth->add_option("--width", o.synth.width);
  synth->add_option("--separation", o.synth.separation);
  synth->add_option("--subject-variation", o.synth.subject_variation);
  synth->add_option("--seed", o.seed);
  synth->add_option("--out", o.out, "output directory")->required();

  auto* extract = app.add_subcommand("extract", "compute log covariance descriptors");
  add_common(extract);
  extract->add_option("--manifest", o.manifest);
  extract->add_option("--store", o.store, "output store directory");
  extract->add_option("--epsilon", o.epsilon, "regularization added to the diagonal");
  extract->add_option("--ratio", o.ratio, "feature map / input size ratio");
  extract->add_option("--resize", o.resize, "H,W target for local regions")->delimiter(',');
  extract->add_flag("--strict", o.strict, "fail on the first bad sample");

  auto* gram = app.add_subcommand("gram", "write a Gram matrix for one region and gamma");
  add_common(gram);
  gram->add_option("--store", o.store);
  gram->add_option("--gamma-grid", o.gamma_grid, "single gamma value")->delimiter(',');
  gram->add_option("--out", o.out);

  auto* train = app.add_subcommand("train", "grid search and train one SVM per region");
  add_common(train);
  add_training(train);
  train->add_option("--store", o.store);
  train->add_option("--out", o.out, "model bundle JSON");

  auto* predict_cmd = app.add_subcommand("predict", "score a test store with a model bundle");
  predict_cmd->add_option("--model", o.model, "model bundle JSON");
  predict_cmd->add_option("--store", o.store, "test descriptor store");
  predict_cmd->add_option("--unit", o.unit, "frame or video (must match the bundle)");
  predict_cmd->add_option("--out", o.out, "predictions JSON");

  auto* evaluate = app.add_subcommand(
      "evaluate", "report on a predictions file, or run nested cross-validation on a store");
  add_common(evaluate);
  add_training(evaluate);
  evaluate->add_option("--predictions", o.predictions);
  evaluate->add_option("--rule", o.rule, "none or all-frames (frame predictions only)");
  evaluate->add_option("--store", o.store);
  evaluate->add_option("--csv", o.csv, "confusion matrix CSV");
  evaluate->add_option("--out", o.out, "report JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*synth) return run_synth(o);
    if (*extract) return run_extract(o);
    if (*gram) return run_gram(o);
    if (*train) return run_train(o);
    if (*predict_cmd) return run_predict(o);
    if (*evaluate) return run_evaluate(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}
