#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "stance/annotation.hpp"
#include "stance/errors.hpp"
#include "support/synthetic.hpp"

using namespace stance;
using namespace stance::annotation;

namespace {

AnnotationRecord rec(const std::string& instance, const std::string& annotator,
                     Stance label, bool related = true) {
  return AnnotationRecord{instance, annotator, label, related};
}

// Builds label vectors from a 2x2 contingency table over {favor, against}:
// n_ff both favor, n_fa a=favor/b=against, n_af a=against/b=favor, n_aa both
// against. Appends `noise` pairs involving a none label, which kappa ignores.
std::pair<std::vector<Stance>, std::vector<Stance>> kappa_table(
    int n_ff, int n_fa, int n_af, int n_aa, int noise = 0) {
  std::vector<Stance> a, b;
  auto push = [&](Stance x, Stance y, int n) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  push(Stance::Favor, Stance::Favor, n_ff);
  push(Stance::Favor, Stance::Against, n_fa);
  push(Stance::Against, Stance::Favor, n_af);
  push(Stance::Against, Stance::Against, n_aa);
  push(Stance::None, Stance::Favor, noise);
  push(Stance::Against, Stance::None, noise);
  return {a, b};
}

}  // namespace

TEST_CASE("adjudicate resolves the two initial annotators first") {
  auto agree = adjudicate({rec("i", "ann2", Stance::Favor),
                           rec("i", "ann1", Stance::Favor),
                           rec("i", "ann3", Stance::Against)});
  CHECK(agree.outcome == Adjudication::Outcome::Decided);
  CHECK(agree.label == Stance::Favor);  // ann1+ann2 agree; ann3 never consulted
  CHECK(agree.instance_id == "i");

  auto split = adjudicate({rec("i", "b", Stance::Favor),
                           rec("i", "a", Stance::Against)});
  CHECK(split.outcome == Adjudication::Outcome::Escalate);

  auto majority = adjudicate({rec("i", "a", Stance::Against),
                              rec("i", "b", Stance::Favor),
                              rec("i", "c", Stance::Favor)});
  CHECK(majority.outcome == Adjudication::Outcome::Decided);
  CHECK(majority.label == Stance::Favor);

  auto plurality = adjudicate({rec("i", "a", Stance::Against),
                               rec("i", "b", Stance::Favor),
                               rec("i", "c", Stance::None),
                               rec("i", "d", Stance::None)});
  CHECK(plurality.outcome == Adjudication::Outcome::Decided);
  CHECK(plurality.label == Stance::None);

  auto tie = adjudicate({rec("i", "a", Stance::Against),
                         rec("i", "b", Stance::Favor),
                         rec("i", "c", Stance::Against),
                         rec("i", "d", Stance::Favor)});
  CHECK(tie.outcome == Adjudication::Outcome::Escalate);

  auto strict = adjudicate({rec("i", "a", Stance::Against),
                            rec("i", "b", Stance::None),
                            rec("i", "c", Stance::None),
                            rec("i", "d", Stance::None),
                            rec("i", "e", Stance::Favor)});
  CHECK(strict.outcome == Adjudication::Outcome::Decided);
  CHECK(strict.label == Stance::None);
}

TEST_CASE("adjudicate rejects malformed record sets") {
  CHECK_THROWS_AS(adjudicate({}), IntegrityError);
  CHECK_THROWS_AS(adjudicate({rec("i", "a", Stance::Favor)}), IntegrityError);
  CHECK_THROWS_AS(adjudicate({rec("i", "a", Stance::Favor),
                              rec("j", "b", Stance::Favor)}),
                  IntegrityError);
  CHECK_THROWS_AS(adjudicate({rec("i", "a", Stance::Favor),
                              rec("i", "a", Stance::Against)}),
                  IntegrityError);
}

TEST_CASE("cohen_kappa matches closed-form values on 2x2 tables") {
  auto kappa = [](int ff, int fa, int af, int aa, int noise = 0) {
    auto [a, b] = kappa_table(ff, fa, af, aa, noise);
    return cohen_kappa(a, b);
  };
  CHECK(kappa(5, 0, 0, 5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kappa(1, 1, 1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(kappa(0, 5, 5, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(kappa(40, 3, 2, 35) == doctest::Approx(697.0 / 797.0).epsilon(1e-12));
  CHECK(kappa(20, 10, 5, 15) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(kappa(45, 2, 3, 1) == doctest::Approx(26.0 / 111.0).epsilon(1e-12));
  CHECK(kappa(2, 6, 5, 3) == doctest::Approx(-0.375).epsilon(1e-12));
  CHECK(kappa(25, 25, 25, 25) == doctest::Approx(0.0).epsilon(1e-12));
  // Degenerate marginals: pe == 1, full agreement reads as kappa = 1.
  CHECK(kappa(7, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kappa(6, 0, 4, 0) == doctest::Approx(0.0).epsilon(1e-12));
  // Pairs with a none label are excluded before counting.
  CHECK(kappa(20, 10, 5, 15, 4) == doctest::Approx(0.4).epsilon(1e-12));

  CHECK_THROWS_AS(cohen_kappa({Stance::Favor}, {Stance::Favor, Stance::Favor}),
                  ContractViolation);
  CHECK_THROWS_AS(cohen_kappa({Stance::None}, {Stance::Favor}),
                  UndefinedStatistic);
  CHECK_THROWS_AS(cohen_kappa({}, {}), UndefinedStatistic);
}

TEST_CASE("agreement_rate counts initial-annotator matches exactly") {
  std::map<std::string, std::vector<AnnotationRecord>> by_instance;
  by_instance["i1"] = {rec("i1", "a", Stance::Favor), rec("i1", "b", Stance::Favor)};
  by_instance["i2"] = {rec("i2", "a", Stance::Favor), rec("i2", "b", Stance::Against),
                       rec("i2", "c", Stance::Favor)};
  by_instance["i3"] = {rec("i3", "a", Stance::None), rec("i3", "b", Stance::None)};
  by_instance["i4"] = {rec("i4", "b", Stance::Against), rec("i4", "a", Stance::Against)};
  CHECK(agreement_rate(by_instance) == 0.75);
  CHECK_THROWS_AS(agreement_rate({}), UndefinedStatistic);
}

TEST_CASE("agreement report pools initial labels per target") {
  std::vector<AnnotationRecord> records;
  // guns: two instances; annotators always both favor/against -> kappa 1.
  records.push_back(rec("g1", "a", Stance::Favor));
  records.push_back(rec("g1", "b", Stance::Favor));
  records.push_back(rec("g2", "a", Stance::Against));
  records.push_back(rec("g2", "b", Stance::Against));
  // tax: one agreement, one f/a disagreement.
  records.push_back(rec("t1", "a", Stance::Favor));
  records.push_back(rec("t1", "b", Stance::Favor));
  records.push_back(rec("t2", "a", Stance::Favor));
  records.push_back(rec("t2", "b", Stance::Against));
  // Unknown instance ids are skipped.
  records.push_back(rec("zz", "a", Stance::Favor));
  records.push_back(rec("zz", "b", Stance::Favor));

  std::map<std::string, std::string> targets{
      {"g1", "guns"}, {"g2", "guns"}, {"t1", "tax"}, {"t2", "tax"}};
  AgreementReport report = agreement_report(records, targets);
  REQUIRE(report.per_target.size() == 2);
  CHECK(report.per_target[0].target == "guns");
  CHECK(report.per_target[0].kappa == doctest::Approx(1.0));
  CHECK(report.per_target[0].consistency == doctest::Approx(1.0));
  CHECK(report.per_target[0].instances == 2);
  CHECK(report.per_target[1].target == "tax");
  CHECK(report.per_target[1].consistency == doctest::Approx(0.5));
  CHECK(report.avg_consistency == doctest::Approx(0.75));
  CHECK(report.avg_kappa ==
        doctest::Approx((report.per_target[0].kappa + report.per_target[1].kappa) / 2));

  std::string csv = agreement_report_to_csv(report);
  CHECK(csv.rfind("target,kappa,consistency\n", 0) == 0);
  CHECK(csv.find("guns,1.0000,1.0000\n") != std::string::npos);
  CHECK(csv.find("average,") != std::string::npos);
}

TEST_CASE("annotation jsonl round trip and validation") {
  testing::TempDir dir("annio");
  std::vector<AnnotationRecord> records{
      rec("i1", "a", Stance::Favor),
      rec("i1", "b", Stance::Against, false),
  };
  save_annotations_jsonl(dir.file("ann.jsonl"), records);
  auto back = load_annotations_jsonl(dir.file("ann.jsonl"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].instance_id == "i1");
  CHECK(back[0].annotator_id == "a");
  CHECK(back[0].label == Stance::Favor);
  CHECK(back[0].related);
  CHECK(!back[1].related);

  testing::write_file(dir.file("missing.jsonl"),
                      "{\"instance_id\": \"i\", \"label\": \"favor\"}\n");
  CHECK_THROWS_AS(load_annotations_jsonl(dir.file("missing.jsonl")), ParseError);
  CHECK_THROWS_AS(load_annotations_jsonl(dir.file("absent.jsonl")), ConfigError);

  auto grouped = group_by_instance(records);
  REQUIRE(grouped.count("i1") == 1);
  CHECK(grouped.at("i1").size() == 2);
}
