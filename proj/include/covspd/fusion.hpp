#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "covspd/svm.hpp"

namespace covspd {

enum class FusionMethod { kWeightedSum, kProduct };

std::string to_string(FusionMethod method);
FusionMethod fusion_method_from_string(const std::string& s);

struct FusionConfig {
  FusionMethod method = FusionMethod::kWeightedSum;
  std::map<std::string, double> weights;  // region -> weight, weighted sum only
};

struct FusionResult {
  ClassScores scores;
  int predicted = -1;
};

/// Late fusion of per-region scores.
///  - weighted sum: s_c = sum_r w_r scores_r[c], regions without a weight
///    contribute nothing;
///  - product: s_c = prod_r scores_r[c] over every region, zero entries
///    floored at 1e-12 with a warning.
/// The result is renormalized to sum 1 (left as is when it already sums to 1
/// up to rounding); prediction is the argmax with the
/// lowest class index on ties.
FusionResult fuse(const std::map<std::string, ClassScores>& scores, const FusionConfig& config);

/// Throws UsageError on an invalid config (negative weights, or no positive
/// weight for weighted sum).
void validate_fusion_config(const FusionConfig& config);

/// Weight presets: "oulu" (mouth 0.2, others 1) and "sfew" (global 1,
/// others 0.1).
FusionConfig preset_config(const std::string& name, FusionMethod method);

nlohmann::json fusion_to_json(const FusionConfig& config);
FusionConfig fusion_from_json(const nlohmann::json& j);
FusionConfig load_fusion_config(const std::filesystem::path& path);

}  // namespace covspd
