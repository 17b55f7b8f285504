#include "covspd/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "covspd/errors.hpp"
#include "covspd/eval.hpp"

namespace covspd {
namespace {

constexpr double kTau = 1e-12;
constexpr double kMinProbability = 1e-7;

// SMO for   min 1/2 a^T Q a - e^T a,  0 <= a <= C,  y^T a = 0,
// with Q_ij = y_i y_j K_ij. Updates follow the two-variable analytic step
// with box clipping.
class SmoSolver {
 public:
  SmoSolver(const Eigen::MatrixXd& k, std::span<const int> y, double cost)
      : k_(k), y_(y.begin(), y.end()), cost_(cost), alpha_(y.size(), 0.0), grad_(y.size(), -1.0) {}

  std::int64_t solve(double tolerance, std::int64_t max_iterations) {
    const auto n = static_cast<Eigen::Index>(y_.size());
    std::int64_t iter = 0;
    for (;; ++iter) {
      Eigen::Index i = -1, j = -1;
      double gmax = -std::numeric_limits<double>::infinity();
      double gmax2 = -std::numeric_limits<double>::infinity();
      for (Eigen::Index t = 0; t < n; ++t) {
        const double v = -y_[t] * grad_[t];
        if (in_up(t) && v > gmax) {
          gmax = v;
          i = t;
        }
        if (in_low(t) && -v > gmax2) {
          gmax2 = -v;
          j = t;
        }
      }
      if (i < 0 || j < 0 || gmax + gmax2 < tolerance) break;
      if (iter >= max_iterations) {
        std::ostringstream msg;
        msg << "SMO did not converge within " << max_iterations << " iterations (violation "
            << gmax + gmax2 << ", cost " << cost_ << ")";
        throw ConvergenceError(msg.str());
      }
      step(i, j);
    }
    return iter;
  }

  double rho() const {
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int free_count = 0;
    for (std::size_t t = 0; t < y_.size(); ++t) {
      const double yg = y_[t] * grad_[t];
      if (alpha_[t] >= cost_) {
        if (y_[t] < 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else if (alpha_[t] <= 0.0) {
        if (y_[t] > 0) ub = std::min(ub, yg);
        else lb = std::max(lb, yg);
      } else {
        ++free_count;
        sum_free += yg;
      }
    }
    return free_count > 0 ? sum_free / free_count : 0.5 * (ub + lb);
  }

  const std::vector<double>& alpha() const { return alpha_; }

 private:
  bool in_up(Eigen::Index t) const {
    return (y_[t] > 0 && alpha_[t] < cost_) || (y_[t] < 0 && alpha_[t] > 0.0);
  }
  bool in_low(Eigen::Index t) const {
    return (y_[t] < 0 && alpha_[t] < cost_) || (y_[t] > 0 && alpha_[t] > 0.0);
  }
  double q(Eigen::Index a, Eigen::Index b) const { return y_[a] * y_[b] * k_(a, b); }

  void step(Eigen::Index i, Eigen::Index j) {
    const double c = cost_;
    const double old_i = alpha_[i];
    const double old_j = alpha_[j];
    double& ai = alpha_[i];
    double& aj = alpha_[j];
    if (y_[i] != y_[j]) {
      double quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad_[i] - grad_[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) {
          aj = 0.0;
          ai = diff;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = -diff;
      }
      if (diff > 0.0) {
        if (ai > c) {
          ai = c;
          aj = c - diff;
        }
      } else if (aj > c) {
        aj = c;
        ai = c + diff;
      }
    } else {
      double quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad_[i] - grad_[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) {
          ai = c;
          aj = sum - c;
        }
      } else if (aj < 0.0) {
        aj = 0.0;
        ai = sum;
      }
      if (sum > c) {
        if (aj > c) {
          aj = c;
          ai = sum - c;
        }
      } else if (ai < 0.0) {
        ai = 0.0;
        aj = sum;
      }
    }
    const double di = ai - old_i;
    const double dj = aj - old_j;
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(y_.size()); ++t) {
      grad_[t] += q(t, i) * di + q(t, j) * dj;
    }
  }

  const Eigen::MatrixXd& k_;
  std::vector<int> y_;
  double cost_;
  std::vector<double> alpha_;
  std::vector<double> grad_;
};

double sigmoid_predict(double decision, const PlattParams& p) {
  const double f = decision * p.a + p.b;
  return f >= 0.0 ? std::exp(-f) / (1.0 + std::exp(-f)) : 1.0 / (1.0 + std::exp(f));
}

}  // namespace

PlattParams fit_platt(std::span<const double> decisions, std::span<const int> labels) {
  if (decisions.size() != labels.size()) throw DimensionMismatchError("platt: length mismatch");
  double prior1 = 0.0, prior0 = 0.0;
  for (int y : labels) (y > 0 ? prior1 : prior0) += 1.0;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  const std::size_t n = labels.size();
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] > 0 ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decisions[i] * aa + bb;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };
  double fval = objective(a, b);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = decisions[i] * a + b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += decisions[i] * decisions[i] * d2;
      h22 += d2;
      h21 += decisions[i] * d2;
      const double d1 = t[i] - p;
      g1 += decisions[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 0.0001 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;  // line search failed; keep the last iterate
  }
  return {a, b};
}

double platt_probability(const PlattParams& platt, double decision) {
  return std::clamp(sigmoid_predict(decision, platt), kMinProbability, 1.0 - kMinProbability);
}

BinaryModel train_binary(const Eigen::MatrixXd& gram, std::span<const int> labels, double cost,
                         const SmoOptions& options) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (gram.rows() != n || gram.cols() != n) {
    throw DimensionMismatchError("train_binary: gram is not square with one row per label");
  }
  if (!(cost > 0.0)) throw UsageError("SVM cost must be positive");
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == -1) has_neg = true;
    else throw UsageError("binary labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw DataError("train_binary needs both classes");

  const std::int64_t cap = options.max_iterations > 0
                               ? options.max_iterations
                               : std::max<std::int64_t>(10'000'000, 100 * static_cast<std::int64_t>(n));
  SmoSolver solver(gram, labels, cost);
  BinaryModel model;
  model.iterations = solver.solve(options.tolerance, cap);
  model.bias = -solver.rho();
  model.indices.resize(labels.size());
  std::iota(model.indices.begin(), model.indices.end(), Eigen::Index{0});
  model.alpha.resize(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) model.alpha[t] = solver.alpha()[t] * labels[t];

  std::vector<double> decisions(labels.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    double f = model.bias;
    for (Eigen::Index t = 0; t < n; ++t) f += model.alpha[t] * gram(r, t);
    decisions[r] = f;
  }
  model.platt = fit_platt(decisions, labels);
  return model;
}

double decision_value(const BinaryModel& model, std::span<const double> kernel_row) {
  double f = model.bias;
  for (std::size_t t = 0; t < model.indices.size(); ++t) {
    const auto idx = static_cast<std::size_t>(model.indices[t]);
    if (idx >= kernel_row.size()) throw DimensionMismatchError("kernel row too short for model");
    f += model.alpha[t] * kernel_row[idx];
  }
  return f;
}

int ClassScores::argmax() const {
  if (values.empty()) return -1;
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

SvmModel train_multiclass(const GramMatrix& gram, std::span<const int> labels, double cost,
                          int num_classes, const SmoOptions& options) {
  const std::size_t n = labels.size();
  if (gram.values.rows() != static_cast<Eigen::Index>(n) ||
      gram.values.cols() != static_cast<Eigen::Index>(n) || gram.row_ids.size() != n) {
    throw DimensionMismatchError("train_multiclass: gram must be square with one row per label");
  }
  if (n == 0) throw DataError("train_multiclass: empty training set");

  // Canonical sample order by id makes training independent of input order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return gram.row_ids[a] < gram.row_ids[b]; });

  SvmModel model;
  model.gamma = gram.gamma;
  model.cost = cost;
  model.region = gram.region;
  const int max_label = *std::max_element(labels.begin(), labels.end());
  model.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  std::vector<int> sorted_labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[order[i]];
    if (y < 0 || y >= model.num_classes) throw DataError("class label out of range");
    sorted_labels[i] = y;
    model.training_ids.push_back(gram.row_ids[order[i]]);
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (model.training_ids[i] == model.training_ids[i - 1]) {
      throw DataError("duplicate training id \"" + model.training_ids[i] + "\"");
    }
  }
  model.classes = sorted_labels;
  std::sort(model.classes.begin(), model.classes.end());
  model.classes.erase(std::unique(model.classes.begin(), model.classes.end()), model.classes.end());
  if (model.classes.size() < 2) throw DataError("training set holds fewer than 2 classes");

  for (std::size_t ca = 0; ca < model.classes.size(); ++ca) {
    for (std::size_t cb = ca + 1; cb < model.classes.size(); ++cb) {
      std::vector<std::size_t> members;
      std::vector<int> y;
      for (std::size_t i = 0; i < n; ++i) {
        if (sorted_labels[i] == model.classes[ca]) {
          members.push_back(i);
          y.push_back(1);
        } else if (sorted_labels[i] == model.classes[cb]) {
          members.push_back(i);
          y.push_back(-1);
        }
      }
      const auto m = static_cast<Eigen::Index>(members.size());
      Eigen::MatrixXd sub(m, m);
      for (Eigen::Index r = 0; r < m; ++r) {
        for (Eigen::Index c = 0; c < m; ++c) {
          sub(r, c) = gram.values(static_cast<Eigen::Index>(order[members[r]]),
                                  static_cast<Eigen::Index>(order[members[c]]));
        }
      }
      BinaryModel b = train_binary(sub, y, cost, options);
      b.positive_class = model.classes[ca];
      b.negative_class = model.classes[cb];
      for (Eigen::Index r = 0; r < m; ++r) b.indices[r] = static_cast<Eigen::Index>(members[r]);
      model.binaries.push_back(std::move(b));
    }
  }
  return model;
}

ClassScores predict_scores(const SvmModel& model, std::span<const double> kernel_row) {
  if (kernel_row.size() != model.training_ids.size()) {
    throw DimensionMismatchError("kernel row has " + std::to_string(kernel_row.size()) +
                                 " entries, model expects " +
                                 std::to_string(model.training_ids.size()));
  }
  ClassScores scores{std::vector<double>(static_cast<std::size_t>(model.num_classes), 0.0)};
  if (model.classes.size() < 2) return scores;
  for (const auto& b : model.binaries) {
    const double p = platt_probability(b.platt, decision_value(b, kernel_row));
    scores.values[b.positive_class] += p;
    scores.values[b.negative_class] += 1.0 - p;
  }
  const double pairs_per_class = static_cast<double>(model.classes.size() - 1);
  double total = 0.0;
  for (double& v : scores.values) {
    v /= pairs_per_class;
    total += v;
  }
  for (double& v : scores.values) v /= total;
  return scores;
}

std::vector<double> default_gamma_grid() {
  std::vector<double> g;
  for (int e = -3; e >= -10; --e) g.push_back(std::pow(10.0, e));
  return g;
}

std::vector<double> default_cost_grid() {
  std::vector<double> c;
  for (int e = 3; e <= 8; ++e) c.push_back(std::pow(10.0, e));
  return c;
}

GridSearchResult grid_search(const GridSearchData& data, std::span<const double> gamma_grid,
                             std::span<const double> cost_grid, int folds, std::uint64_t seed,
                             const SmoOptions& options) {
  if (gamma_grid.empty() || cost_grid.empty()) throw UsageError("grid search: empty grid");
  const std::size_t n = data.ids.size();
  if (data.labels.size() != n || data.subjects.size() != n ||
      data.squared_distances.rows() != static_cast<Eigen::Index>(n) ||
      data.squared_distances.cols() != static_cast<Eigen::Index>(n)) {
    throw DimensionMismatchError("grid search: inconsistent data sizes");
  }
  const FoldAssignment assignment = make_folds(data.subjects, folds, seed);
  const int num_classes =
      data.num_classes > 0 ? data.num_classes
                           : *std::max_element(data.labels.begin(), data.labels.end()) + 1;

  std::vector<std::vector<std::size_t>> train_idx(folds), test_idx(folds);
  for (std::size_t i = 0; i < n; ++i) {
    const int f = assignment.fold(data.subjects[i]);
    for (int g = 0; g < folds; ++g) (g == f ? test_idx : train_idx)[g].push_back(i);
  }

  GridSearchResult result;
  bool have_best = false;
  for (double gamma : gamma_grid) {
    const Eigen::MatrixXd k = kernel_from_squared_distances(data.squared_distances, gamma);
    for (double cost : cost_grid) {
      GridCell cell{gamma, cost, 0.0, {}, false, ""};
      try {
        for (int f = 0; f < folds; ++f) {
          const auto& tr = train_idx[f];
          const auto& te = test_idx[f];
          GramMatrix sub;
          sub.gamma = gamma;
          sub.region = data.region;
          sub.values.resize(static_cast<Eigen::Index>(tr.size()), static_cast<Eigen::Index>(tr.size()));
          std::vector<int> y;
          for (std::size_t r = 0; r < tr.size(); ++r) {
            sub.row_ids.push_back(data.ids[tr[r]]);
            y.push_back(data.labels[tr[r]]);
            for (std::size_t c = 0; c < tr.size(); ++c) {
              sub.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                  k(static_cast<Eigen::Index>(tr[r]), static_cast<Eigen::Index>(tr[c]));
            }
          }
          sub.col_ids = sub.row_ids;
          const SvmModel model = train_multiclass(sub, y, cost, num_classes, options);

          // Model columns are in canonical id order; map back to data rows.
          std::map<std::string, std::size_t> row_of;
          for (std::size_t r = 0; r < tr.size(); ++r) row_of[data.ids[tr[r]]] = tr[r];
          std::vector<double> row(model.training_ids.size());
          std::size_t correct = 0;
          for (std::size_t t : te) {
            for (std::size_t c = 0; c < row.size(); ++c) {
              row[c] = k(static_cast<Eigen::Index>(t),
                         static_cast<Eigen::Index>(row_of.at(model.training_ids[c])));
            }
            if (predict_scores(model, row).argmax() == data.labels[t]) ++correct;
          }
          cell.fold_accuracy.push_back(te.empty() ? 0.0 : static_cast<double>(correct) / te.size());
        }
        cell.mean_accuracy = std::accumulate(cell.fold_accuracy.begin(), cell.fold_accuracy.end(), 0.0) /
                             static_cast<double>(cell.fold_accuracy.size());
      } catch (const NumericalError& e) {
        cell.failed = true;
        cell.message = e.what();
      } catch (const DataError& e) {
        cell.failed = true;
        cell.message = e.what();
      }
      if (!cell.failed) {
        const bool better =
            !have_best || cell.mean_accuracy > result.best_accuracy ||
            (cell.mean_accuracy == result.best_accuracy &&
             (gamma > result.best_gamma || (gamma == result.best_gamma && cost < result.best_cost)));
        if (better) {
          have_best = true;
          result.best_gamma = gamma;
          result.best_cost = cost;
          result.best_accuracy = cell.mean_accuracy;
        }
      }
      result.table.push_back(std::move(cell));
    }
  }
  if (!have_best) throw ConvergenceError("grid search: every cell failed");
  return result;
}

nlohmann::json model_to_json(const SvmModel& model) {
  nlohmann::json j;
  j["num_classes"] = model.num_classes;
  j["classes"] = model.classes;
  j["gamma"] = model.gamma;
  j["cost"] = model.cost;
  j["region"] = model.region;
  j["training_ids"] = model.training_ids;
  nlohmann::json binaries = nlohmann::json::array();
  for (const auto& b : model.binaries) {
    binaries.push_back({{"classes", {b.positive_class, b.negative_class}},
                        {"indices", b.indices},
                        {"alpha", b.alpha},
                        {"bias", b.bias},
                        {"platt", {b.platt.a, b.platt.b}}});
  }
  j["binaries"] = std::move(binaries);
  return j;
}

SvmModel model_from_json(const nlohmann::json& j) {
  try {
    SvmModel m;
    m.num_classes = j.at("num_classes").get<int>();
    m.classes = j.at("classes").get<std::vector<int>>();
    m.gamma = j.at("gamma").get<double>();
    m.cost = j.at("cost").get<double>();
    m.region = j.at("region").get<std::string>();
    m.training_ids = j.at("training_ids").get<std::vector<std::string>>();
    for (const auto& jb : j.at("binaries")) {
      BinaryModel b;
      const auto classes = jb.at("classes").get<std::vector<int>>();
      const auto platt = jb.at("platt").get<std::vector<double>>();
      if (classes.size() != 2 || platt.size() != 2) throw DataError("malformed binary model");
      b.positive_class = classes[0];
      b.negative_class = classes[1];
      b.indices = jb.at("indices").get<std::vector<Eigen::Index>>();
      b.alpha = jb.at("alpha").get<std::vector<double>>();
      b.bias = jb.at("bias").get<double>();
      b.platt = {platt[0], platt[1]};
      if (b.indices.size() != b.alpha.size()) throw DataError("binary model: indices/alpha mismatch");
      for (auto idx : b.indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= m.training_ids.size()) {
          throw DataError("binary model index out of range");
        }
      }
      m.binaries.push_back(std::move(b));
    }
    const std::size_t k = m.classes.size();
    if (m.binaries.size() != k * (k - 1) / 2) throw DataError("model has wrong number of binaries");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed SVM model JSON: " + std::string(e.what()));
  }
}

}  // namespace covspd
