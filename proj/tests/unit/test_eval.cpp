#include <doctest.h>

#include <algorithm>
#include <set>

#include "covspd/errors.hpp"
#include "covspd/eval.hpp"
#include "support.hpp"

using namespace covspd;
using covspd::testing::Rng;

namespace {

std::vector<std::string> subjects(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("p" + std::to_string(i));
  return out;
}

void check_invariants(const EvalReport& r) {
  const std::size_t k = r.class_names.size();
  REQUIRE(r.confusion.size() == k);
  long total = 0, diag = 0;
  for (std::size_t i = 0; i < k; ++i) {
    REQUIRE(r.confusion[i].size() == k);
    long row = 0;
    for (std::size_t j = 0; j < k; ++j) {
      CHECK(r.confusion[i][j] >= 0);
      row += r.confusion[i][j];
    }
    total += row;
    diag += r.confusion[i][i];
    const double recall = row == 0 ? 0.0 : 100.0 * r.confusion[i][i] / row;
    CHECK(r.per_class_recall[i] == doctest::Approx(recall));
  }
  CHECK(total == r.total);
  CHECK(r.overall_accuracy == doctest::Approx(total == 0 ? 0.0 : 100.0 * diag / total));
}

}  // namespace

TEST_CASE("80 subjects into 10 folds of 8") {
  const auto s = subjects(80);
  const FoldAssignment f = make_folds(s, 10, 3);
  for (int i = 0; i < 10; ++i) CHECK(f.subjects_in(i).size() == 8);
  std::set<std::string> seen;
  for (int i = 0; i < 10; ++i) {
    for (const auto& x : f.subjects_in(i)) CHECK(seen.insert(x).second);
  }
  CHECK(seen.size() == 80);
}

TEST_CASE("folds are deterministic, seed dependent and balanced") {
  const auto s = subjects(23);
  const FoldAssignment a = make_folds(s, 5, 42);
  const FoldAssignment b = make_folds(s, 5, 42);
  CHECK(a.fold_of == b.fold_of);
  CHECK(make_folds(s, 5, 43).fold_of != a.fold_of);
  for (int i = 0; i < 5; ++i) {
    const auto n = a.subjects_in(i).size();
    CHECK(n >= 4);
    CHECK(n <= 5);
  }
  std::vector<std::string> repeated;
  for (const auto& x : s) repeated.insert(repeated.end(), 3, x);
  std::reverse(repeated.begin(), repeated.end());
  CHECK(make_folds(repeated, 5, 42).fold_of == a.fold_of);
}

TEST_CASE("k equal to the subject count is leave-one-subject-out") {
  const auto s = subjects(7);
  const FoldAssignment f = make_folds(s, 7, 0);
  for (int i = 0; i < 7; ++i) CHECK(f.subjects_in(i).size() == 1);
  CHECK_THROWS_AS(make_folds(s, 8, 0), DataError);
  CHECK_THROWS_AS(make_folds(s, 1, 0), UsageError);
  CHECK_THROWS_AS(f.fold("stranger"), DataError);
}

TEST_CASE("seeded permutation is a permutation") {
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    auto p = seeded_permutation(50, seed);
    CHECK(p == seeded_permutation(50, seed));
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < 50; ++i) CHECK(p[i] == i);
  }
}

TEST_CASE("reports: all correct and a consistently confused class") {
  const std::vector<std::pair<int, int>> right = {{0, 0}, {1, 1}, {2, 2}, {1, 1}};
  const EvalReport a = make_report(right, {"a", "b", "c"}, EvalUnit::kFrame);
  CHECK(a.overall_accuracy == 100.0);
  CHECK(a.confusion[1][1] == 2);
  check_invariants(a);

  const std::vector<std::pair<int, int>> confused = {{0, 0}, {1, 2}, {1, 2}, {2, 2}};
  const EvalReport b = make_report(confused, {"a", "b", "c"}, EvalUnit::kFrame);
  CHECK(b.confusion[1] == std::vector<long>{0, 0, 2});
  CHECK(b.per_class_recall[1] == 0.0);
  CHECK(b.overall_accuracy == 50.0);
  check_invariants(b);

  const std::vector<std::pair<int, int>> bad = {{0, 3}};
  CHECK_THROWS_AS(make_report(bad, {"a", "b"}, EvalUnit::kFrame), DataError);
}

TEST_CASE("ten folds of 48 videos aggregate to 480") {
  std::map<std::string, int> pred, truth;
  Rng rng(1);
  for (int v = 0; v < 480; ++v) {
    const std::string id = "v" + std::to_string(v);
    truth[id] = v % 6;
    pred[id] = rng.uniform() < 0.8 ? v % 6 : (v + 1) % 6;
  }
  const EvalReport r = evaluate_video(pred, truth, {"an", "di", "fe", "ha", "sa", "su"});
  CHECK(r.total == 480);
  CHECK(r.unit == EvalUnit::kVideo);
  check_invariants(r);
  pred.erase("v0");
  CHECK_THROWS_AS(evaluate_video(pred, truth, {"an", "di", "fe", "ha", "sa", "su"}), DataError);
}

TEST_CASE("all-frames video rule") {
  std::map<FrameKey, int> truth, pred;
  for (int f = 0; f < 3; ++f) {
    truth[{"good", f}] = 1;
    pred[{"good", f}] = 1;
    truth[{"bad", f}] = 0;
    pred[{"bad", f}] = f == 2 ? 2 : 0;
  }
  const EvalReport r = softmax_video_rule(pred, truth, {"a", "b", "c"});
  CHECK(r.total == 2);
  CHECK(r.confusion[1][1] == 1);
  CHECK(r.confusion[0][2] == 1);
  CHECK(r.overall_accuracy == 50.0);
  check_invariants(r);

  pred.erase({"bad", 1});
  CHECK_THROWS_AS(softmax_video_rule(pred, truth, {"a", "b", "c"}), DataError);
}

TEST_CASE("one-frame videos reduce to frame accuracy; video rule never beats frames") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int frames = trial % 2 == 0 ? 1 : 3;
    std::map<FrameKey, int> truth, pred;
    std::vector<std::pair<int, int>> pairs;
    for (int v = 0; v < 30; ++v) {
      const int label = v % 3;
      for (int f = 0; f < frames; ++f) {
        const int p = rng.uniform() < 0.7 ? label : (label + 1) % 3;
        truth[{"v" + std::to_string(v), f}] = label;
        pred[{"v" + std::to_string(v), f}] = p;
        pairs.emplace_back(label, p);
      }
    }
    const EvalReport video = softmax_video_rule(pred, truth, {"a", "b", "c"});
    const EvalReport frame = make_report(pairs, {"a", "b", "c"}, EvalUnit::kFrame);
    check_invariants(video);
    if (frames == 1) {
      CHECK(video.overall_accuracy == doctest::Approx(frame.overall_accuracy));
      CHECK(video.confusion == frame.confusion);
    } else {
      CHECK(video.overall_accuracy <= frame.overall_accuracy + 1e-9);
    }
  }
}

TEST_CASE("report rendering") {
  const std::vector<std::pair<int, int>> pairs = {{0, 0}, {1, 0}};
  const EvalReport r = make_report(pairs, {"x", "y"}, EvalUnit::kVideo);
  const auto j = report_to_json(r);
  CHECK(j.at("overall_accuracy").get<double>() == 50.0);
  CHECK(j.at("unit").get<std::string>() == "video");
  CHECK(report_to_table(r).find("50") != std::string::npos);
  const std::string csv = confusion_to_csv(r);
  CHECK(csv.find("x") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(eval_unit_from_string("frame") == EvalUnit::kFrame);
  CHECK_THROWS_AS(eval_unit_from_string("clip"), UsageError);
}
