#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "covspd/kernel.hpp"

namespace covspd {

/// Sigmoid calibration P(positive | f) = 1 / (1 + exp(A f + B)).
struct PlattParams {
  double a = 0.0;
  double b = 0.0;
};

/// One C-SVC trained on the samples of a class pair. `alpha` holds the
/// signed dual coefficients alpha_i * y_i for the training samples at
/// `indices` (positions in the owning model's training ids); decision value
/// is sum_i alpha_i K(x_i, x) + bias, positive for `positive_class`.
struct BinaryModel {
  int positive_class = 0;
  int negative_class = 1;
  std::vector<Eigen::Index> indices;
  std::vector<double> alpha;
  double bias = 0.0;
  PlattParams platt;
  std::int64_t iterations = 0;
};

struct SmoOptions {
  double tolerance = 1e-3;
  /// 0 selects max(10'000'000, 100 * n).
  std::int64_t max_iterations = 0;
};

/// Solves the C-SVC dual on a precomputed Gram matrix with SMO (maximal
/// violating pair, lowest index on ties), then fits Platt parameters on the
/// training decision values. Labels are +1 / -1. Indices in the result are
/// 0..n-1. Throws DataError for single-class labels and ConvergenceError
/// when the iteration cap is hit.
BinaryModel train_binary(const Eigen::MatrixXd& gram, std::span<const int> labels, double cost,
                         const SmoOptions& options = {});

/// Decision value given kernel values against every training sample of the
/// owning model.
double decision_value(const BinaryModel& model, std::span<const double> kernel_row);

/// Platt probability of the positive class, clamped to [1e-7, 1 - 1e-7].
double platt_probability(const PlattParams& platt, double decision);

/// Regularized maximum-likelihood sigmoid fit (Newton with backtracking).
PlattParams fit_platt(std::span<const double> decisions, std::span<const int> labels);

/// Per-class probabilities, indexed by class index. Sum to 1, all >= 0.
struct ClassScores {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t c) const { return values[c]; }
  /// Argmax with lowest index on ties.
  int argmax() const;
};

struct SvmModel {
  int num_classes = 0;
  std::vector<int> classes;  // classes present in training, ascending
  std::vector<BinaryModel> binaries;
  double gamma = 0.0;
  double cost = 0.0;
  std::string region;
  std::vector<std::string> training_ids;  // columns of any prediction kernel row
};

/// One-vs-one training. Samples are internally ordered by id, so permuting
/// the input yields the same model. `num_classes` of 0 means max label + 1.
SvmModel train_multiclass(const GramMatrix& gram, std::span<const int> labels, double cost,
                          int num_classes = 0, const SmoOptions& options = {});

/// Averages each class's pairwise Platt probabilities, then normalizes.
/// Classes absent from training score 0. Throws DimensionMismatchError if
/// the row length differs from training_ids.
ClassScores predict_scores(const SvmModel& model, std::span<const double> kernel_row);

/// Training data for a grid search: units (frames or videos) with labels,
/// subjects and their pairwise squared log-Euclidean distances.
struct GridSearchData {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::string> subjects;
  Eigen::MatrixXd squared_distances;
  std::string region;
  int num_classes = 0;
};

struct GridCell {
  double gamma = 0.0;
  double cost = 0.0;
  double mean_accuracy = 0.0;  // fraction in [0, 1]
  std::vector<double> fold_accuracy;
  bool failed = false;
  std::string message;
};

struct GridSearchResult {
  double best_gamma = 0.0;
  double best_cost = 0.0;
  double best_accuracy = 0.0;
  std::vector<GridCell> table;
};

/// Powers of ten 1e-3 .. 1e-10 and 1e3 .. 1e8.
std::vector<double> default_gamma_grid();
std::vector<double> default_cost_grid();

/// Subject-independent k-fold CV for every (gamma, cost). Best cell is the
/// highest mean accuracy; ties go to the larger gamma, then the smaller
/// cost. Cells whose solver fails are marked and skipped.
GridSearchResult grid_search(const GridSearchData& data, std::span<const double> gamma_grid,
                             std::span<const double> cost_grid, int folds, std::uint64_t seed,
                             const SmoOptions& options = {});

nlohmann::json model_to_json(const SvmModel& model);
SvmModel model_from_json(const nlohmann::json& j);

}  // namespace covspd
