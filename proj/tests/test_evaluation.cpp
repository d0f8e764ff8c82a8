#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "stance/errors.hpp"
#include "stance/evaluation.hpp"

using namespace stance;
using namespace stance::evaluation;

namespace {

constexpr double kTol = 1e-9;

std::vector<Stance> seq(std::initializer_list<Stance> s) { return {s}; }

constexpr Stance A = Stance::Against;
constexpr Stance F = Stance::Favor;
constexpr Stance N = Stance::None;

}  // namespace

TEST_CASE("confusion matrix counts and composes") {
  ConfusionMatrix cm;
  cm.add(A, A);
  cm.add(A, F, 2);
  cm.add(N, A);
  CHECK(cm.total() == 4);
  CHECK(cm.gold_count(A) == 3);
  CHECK(cm.gold_count(N) == 1);
  CHECK(cm.counts[0][1] == 2);

  ConfusionMatrix other;
  other.add(F, F, 5);
  cm += other;
  CHECK(cm.total() == 9);
  CHECK(cm.gold_count(F) == 5);
}

TEST_CASE("f1 and f_avg match hand-computed fixtures") {
  auto check_case = [](std::vector<Stance> gold, std::vector<Stance> pred,
                       double f1_a, double f1_f, double favg) {
    CHECK(f1_per_class(gold, pred, A) == doctest::Approx(f1_a).epsilon(kTol));
    CHECK(f1_per_class(gold, pred, F) == doctest::Approx(f1_f).epsilon(kTol));
    CHECK(f_avg(gold, pred) == doctest::Approx(favg).epsilon(kTol));
  };

  check_case(seq({A, F, N}), seq({A, F, N}), 100.0, 100.0, 100.0);
  check_case(seq({N, N, N, N}), seq({N, N, N, N}), 0.0, 0.0, 0.0);
  check_case(seq({F, F, A}), seq({F, A, A}), 200.0 / 3.0, 200.0 / 3.0,
             200.0 / 3.0);
  check_case(seq({A, F, N, F}), seq({A, A, A, A}), 40.0, 0.0, 20.0);
  check_case(seq({A, F}), seq({F, A}), 0.0, 0.0, 0.0);
  check_case(seq({A, A, F, F, N, N}), seq({A, N, F, N, A, F}), 50.0, 50.0, 50.0);
  check_case(seq({A, A, F, F, N, N}), seq({A, F, F, N, N, A}), 50.0, 50.0, 50.0);
  check_case(seq({A, A, A, A, A, A, A, A, F, F}),
             seq({A, A, A, A, A, A, F, F, F, F}), 600.0 / 7.0, 200.0 / 3.0,
             1600.0 / 21.0);
  check_case(seq({N, N, N}), seq({N, N, A}), 0.0, 0.0, 0.0);
  check_case(seq({F}), seq({F}), 0.0, 100.0, 50.0);
  check_case(seq({F}), seq({A}), 0.0, 0.0, 0.0);
  check_case(seq({A, F, N, A, F, N, A, F, N, A}),
             seq({A, F, N, N, F, A, A, A, N, F}), 50.0, 200.0 / 3.0,
             175.0 / 3.0);

  CHECK(f1_per_class(seq({N}), seq({N}), N) == doctest::Approx(100.0));
  CHECK_THROWS_AS(f_avg(seq({A}), seq({A, F})), ContractViolation);
}

TEST_CASE("metrics_from_confusion mirrors the vector forms") {
  ConfusionMatrix cm;
  std::vector<Stance> gold = seq({A, A, F, F, N, N});
  std::vector<Stance> pred = seq({A, F, F, N, N, A});
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  TargetMetrics m = metrics_from_confusion(cm);
  CHECK(m.f1_against == doctest::Approx(50.0).epsilon(kTol));
  CHECK(m.f1_favor == doctest::Approx(50.0).epsilon(kTol));
  CHECK(m.f_avg == doctest::Approx(50.0).epsilon(kTol));
  CHECK(m.support == 6);
  CHECK(f_avg_from_confusion(cm) == doctest::Approx(50.0).epsilon(kTol));
  CHECK(f1_from_confusion(cm, A) == doctest::Approx(50.0).epsilon(kTol));
}

namespace {

// Two targets: "a" has a single correct favor-only instance (F_avg 50);
// "b" is the six-instance rotation case (F_avg 50). Pooled over all seven
// predictions the confusion differs from both per-target views.
std::vector<LabeledPrediction> composite_fixture() {
  std::vector<LabeledPrediction> preds;
  preds.push_back({"a", 1, F, F});
  std::vector<Stance> gold = seq({A, A, F, F, N, N});
  std::vector<Stance> pred = seq({A, F, F, N, N, A});
  for (std::size_t i = 0; i < gold.size(); ++i) {
    preds.push_back({"b", static_cast<int>(1 + 3 * i), gold[i], pred[i]});
  }
  return preds;
}

}  // namespace

TEST_CASE("report_from_predictions separates targets, pool, and buckets") {
  MetricsReport report = report_from_predictions(composite_fixture());

  REQUIRE(report.per_target.count("a") == 1);
  REQUIRE(report.per_target.count("b") == 1);
  CHECK(report.per_target.at("a").f_avg == doctest::Approx(50.0).epsilon(kTol));
  CHECK(report.per_target.at("a").f1_favor == doctest::Approx(100.0).epsilon(kTol));
  CHECK(report.per_target.at("b").f_avg == doctest::Approx(50.0).epsilon(kTol));
  CHECK(report.average_f_avg == doctest::Approx(50.0).epsilon(kTol));

  // Pooled confusion: gold rows against/favor/none.
  CHECK(report.confusion.counts[0][0] == 1);
  CHECK(report.confusion.counts[0][1] == 1);
  CHECK(report.confusion.counts[1][1] == 2);
  CHECK(report.confusion.counts[1][2] == 1);
  CHECK(report.confusion.counts[2][0] == 1);
  CHECK(report.confusion.counts[2][2] == 1);
  CHECK(report.pooled.f1_against == doctest::Approx(50.0).epsilon(kTol));
  CHECK(report.pooled.f1_favor ==
        doctest::Approx(66.66666666666666).epsilon(kTol));
  CHECK(report.pooled.f_avg ==
        doctest::Approx(58.33333333333333).epsilon(kTol));
  CHECK(report.pooled.support == 7);

  // Depths 1,1,4,7,10,13,16 land in buckets 0,1,2,3.
  REQUIRE(report.buckets.count(0) == 1);
  CHECK(report.buckets.at(0).name == "1-2");
  CHECK(report.buckets.at(0).metrics.support == 2);
  CHECK(report.buckets.at(1).metrics.support == 1);
  CHECK(report.buckets.at(2).metrics.support == 1);
  CHECK(report.buckets.at(3).metrics.support == 3);

  CHECK_THROWS_AS(report_from_predictions({}), ConfigError);
}

TEST_CASE("report csv lists target, bucket, overall, and average rows") {
  std::string csv = report_to_csv(report_from_predictions(composite_fixture()));
  CHECK(csv.rfind("row,f1_against,f1_favor,f_avg,support\n", 0) == 0);
  CHECK(csv.find("target/a,0.0000,100.0000,50.0000,1\n") != std::string::npos);
  CHECK(csv.find("target/b,50.0000,50.0000,50.0000,6\n") != std::string::npos);
  CHECK(csv.find("bucket/1-2,") != std::string::npos);
  CHECK(csv.find("bucket/>=9,") != std::string::npos);
  CHECK(csv.find("overall,50.0000,66.6667,58.3333,7\n") != std::string::npos);
  CHECK(csv.find("average,25.0000,75.0000,50.0000,7\n") != std::string::npos);

  std::ostringstream out;
  print_report(out, report_from_predictions(composite_fixture()));
  CHECK(out.str().find("overall") != std::string::npos);
  CHECK(out.str().find("f_avg") != std::string::npos);
}
