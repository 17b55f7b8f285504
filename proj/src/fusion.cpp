#include "covspd/fusion.hpp"

#include <cmath>
#include <limits>
#include <fstream>

#include "covspd/diagnostics.hpp"
#include "covspd/errors.hpp"
#include "covspd/region.hpp"

namespace covspd {
namespace {
constexpr double kProductFloor = 1e-12;
}

std::string to_string(FusionMethod method) {
  return method == FusionMethod::kWeightedSum ? "weighted_sum" : "product";
}

FusionMethod fusion_method_from_string(const std::string& s) {
  if (s == "weighted_sum") return FusionMethod::kWeightedSum;
  if (s == "product") return FusionMethod::kProduct;
  throw UsageError("unknown fusion method \"" + s + "\"");
}

void validate_fusion_config(const FusionConfig& config) {
  bool any_positive = false;
  for (const auto& [region, w] : config.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw UsageError("fusion weight for \"" + region + "\" must be non-negative");
    }
    any_positive = any_positive || w > 0.0;
  }
  if (config.method == FusionMethod::kWeightedSum && !any_positive) {
    throw UsageError("weighted-sum fusion needs at least one positive weight");
  }
}

FusionResult fuse(const std::map<std::string, ClassScores>& scores, const FusionConfig& config) {
  if (scores.empty()) throw DataError("fuse: no scores to fuse");
  validate_fusion_config(config);
  const std::size_t k = scores.begin()->second.size();
  for (const auto& [region, s] : scores) {
    if (s.size() != k) throw DimensionMismatchError("fuse: class counts differ across regions");
  }

  std::vector<double> fused;
  if (config.method == FusionMethod::kWeightedSum) {
    for (const auto& [region, w] : config.weights) {
      if (!scores.contains(region)) {
        throw DataError("fuse: weight given for region \"" + region + "\" without scores");
      }
    }
    fused.assign(k, 0.0);
    for (const auto& [region, w] : config.weights) {
      const auto& s = scores.at(region);
      for (std::size_t c = 0; c < k; ++c) fused[c] += w * s[c];
    }
  } else {
    fused.assign(k, 1.0);
    for (const auto& [region, s] : scores) {
      for (std::size_t c = 0; c < k; ++c) {
        double v = s[c];
        if (v <= 0.0) {
          warn("product fusion: zero score for class " + std::to_string(c) + " in region \"" +
               region + "\", floored at 1e-12");
          v = kProductFloor;
        }
        fused[c] *= v;
      }
    }
  }

  double total = 0.0;
  for (double v : fused) total += v;
  if (!(total > 0.0)) throw NumericalError("fuse: fused scores sum to zero");
  // Already normalized up to summation rounding: leave untouched.
  const double slack = static_cast<double>(k) * std::numeric_limits<double>::epsilon();
  if (std::abs(total - 1.0) > slack) {
    for (double& v : fused) v /= total;
  }
  FusionResult out{ClassScores{std::move(fused)}, -1};
  out.predicted = out.scores.argmax();
  return out;
}

FusionConfig preset_config(const std::string& name, FusionMethod method) {
  using namespace region_names;
  FusionConfig cfg;
  cfg.method = method;
  if (name == "oulu") {
    cfg.weights = {{kGlobal, 1.0}, {kEyes, 1.0}, {kMouth, 0.2}, {kCheekLeft, 1.0}, {kCheekRight, 1.0}};
  } else if (name == "sfew") {
    cfg.weights = {{kGlobal, 1.0}, {kEyes, 0.1}, {kMouth, 0.1}, {kCheekLeft, 0.1}, {kCheekRight, 0.1}};
  } else {
    throw UsageError("unknown fusion preset \"" + name + "\" (expected oulu or sfew)");
  }
  return cfg;
}

nlohmann::json fusion_to_json(const FusionConfig& config) {
  return {{"method", to_string(config.method)}, {"weights", config.weights}};
}

FusionConfig fusion_from_json(const nlohmann::json& j) {
  FusionConfig cfg;
  try {
    cfg.method = fusion_method_from_string(j.at("method").get<std::string>());
    if (j.contains("weights")) cfg.weights = j.at("weights").get<std::map<std::string, double>>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed fusion config: " + std::string(e.what()));
  }
  validate_fusion_config(cfg);
  return cfg;
}

FusionConfig load_fusion_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open fusion config " + path.string());
  try {
    return fusion_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("fusion config is not valid JSON: " + std::string(e.what()));
  }
}

}  // namespace covspd
