#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "stance/errors.hpp"
#include "stance/experiments.hpp"
#include "support/synthetic.hpp"

using namespace stance;
using namespace stance::evaluation;

namespace {

// Small two-target bundle with the corpus split baked in. The cue sits in
// the root utterance, so history carries signal.
CorpusBundle small_bundle(int n = 40) {
  testing::SyntheticCorpus corpus =
      testing::context_corpus(n, 17, {"power", "trade"});
  CorpusBundle bundle;
  bundle.threads = corpus.threads;
  bundle.instances = corpus.instances;
  bundle.split = corpus::split_corpus(bundle.instances, 1);
  return bundle;
}

RunOptions fast_options(int hidden) {
  RunOptions options;
  options.train.epochs = 2;
  options.train.batch_size = 16;
  options.train.lr_head = 0.01;
  options.model.hidden_size = hidden;
  options.config_snapshot["train.setting"] = "with_history";
  return options;
}

}  // namespace

TEST_CASE("experiment plans validate their shape") {
  ExperimentPlan plan;
  plan.validate();  // defaults are fine

  ExperimentPlan no_seeds = plan;
  no_seeds.seeds.clear();
  CHECK_THROWS_AS(no_seeds.validate(), ConfigError);

  ExperimentPlan cross;
  cross.kind = ExperimentKind::CrossTarget;
  cross.source_targets = {"a"};
  cross.destination_targets = {};
  CHECK_THROWS_AS(cross.validate(), ConfigError);
  cross.destination_targets = {"a"};
  CHECK_THROWS_AS(cross.validate(), ConfigError);  // single identical pair
  cross.destination_targets = {"b"};
  cross.validate();
}

TEST_CASE("canonical variant names accept compact aliases") {
  CHECK(canonical_variant_name("full") == "full");
  CHECK(canonical_variant_name("no-global") == "w/o Global");
  CHECK(canonical_variant_name("no-local") == "w/o Local");
  CHECK(canonical_variant_name("no-structural") == "w/o Structural");
  CHECK(canonical_variant_name("no-target-attention") == "w/o Target-attention");
  CHECK(canonical_variant_name("w/o Global") == "w/o Global");
  CHECK_THROWS_AS(canonical_variant_name("no-everything"), ConfigError);
}

TEST_CASE("in-target runs both settings over every target") {
  CorpusBundle bundle = small_bundle();
  encoding::HashedEncoder encoder(8, 128, 3);
  ExperimentPlan plan;
  plan.seeds = {1, 2};
  RunOptions options = fast_options(8);

  InTargetReport report = run_in_target(plan, bundle, encoder, options);
  REQUIRE(report.sentence_only.size() == 2);
  REQUIRE(report.with_history.size() == 2);
  CHECK(report.sentence_only[0].target == "power");
  CHECK(report.with_history[1].target == "trade");
  for (const auto& row : report.with_history) {
    REQUIRE(row.per_seed.size() == 2);
    CHECK(row.per_seed[0].seed == 1);
    CHECK(row.per_seed[1].seed == 2);
    CHECK(row.mean_f_avg ==
          doctest::Approx((row.per_seed[0].f_avg + row.per_seed[1].f_avg) / 2));
  }
  double expected_avg = (report.with_history[0].mean_f_avg +
                         report.with_history[1].mean_f_avg) /
                        2;
  CHECK(report.with_history_average == doctest::Approx(expected_avg));

  // Target filter narrows the grid; unknown filters leave it empty.
  ExperimentPlan narrowed = plan;
  narrowed.source_targets = {"trade"};
  InTargetReport one = run_in_target(narrowed, bundle, encoder, options);
  CHECK(one.with_history.size() == 1);
  CHECK(one.with_history[0].target == "trade");

  std::string csv = in_target_report_to_csv(report);
  CHECK(csv.rfind("target,setting,seed,f_avg\n", 0) == 0);
  CHECK(csv.find("power,sentence_only,1,") != std::string::npos);
  CHECK(csv.find("power,with_history,2,") != std::string::npos);
  CHECK(csv.find("all,sentence_only,mean,") != std::string::npos);
  CHECK(csv.find("all,with_history,mean,") != std::string::npos);

  std::ostringstream out;
  print_in_target(out, report);
  CHECK(out.str().find("with_history") != std::string::npos);
}

TEST_CASE("in-target determinism: same plan, same scores") {
  CorpusBundle bundle = small_bundle(24);
  encoding::HashedEncoder encoder(8, 128, 3);
  ExperimentPlan plan;
  plan.seeds = {1};
  RunOptions options = fast_options(8);
  InTargetReport a = run_in_target(plan, bundle, encoder, options);
  InTargetReport b = run_in_target(plan, bundle, encoder, options);
  CHECK(a.with_history_average == b.with_history_average);
  CHECK(a.sentence_only_average == b.sentence_only_average);
}

TEST_CASE("cross-target trains on source and scores on destination") {
  CorpusBundle bundle = small_bundle();
  encoding::HashedEncoder encoder(8, 128, 3);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::CrossTarget;
  plan.seeds = {1};
  plan.source_targets = {"power", "trade"};
  plan.destination_targets = {"power", "trade"};
  RunOptions options = fast_options(8);

  CrossTargetReport report = run_cross_target(plan, bundle, encoder, options);
  REQUIRE(report.cells.size() == 2);  // 2x2 grid minus the diagonal
  CHECK(report.cells[0].source == "power");
  CHECK(report.cells[0].destination == "trade");
  CHECK(report.cells[1].source == "trade");
  CHECK(report.cells[1].destination == "power");
  for (const auto& cell : report.cells) {
    REQUIRE(cell.per_seed.size() == 1);
    CHECK(cell.mean_f_avg == doctest::Approx(cell.per_seed[0].f_avg));
  }

  std::string csv = cross_target_report_to_csv(report);
  CHECK(csv.rfind("source,destination,seed,f_avg\n", 0) == 0);
  CHECK(csv.find("power,trade,1,") != std::string::npos);
  CHECK(csv.find("power,trade,mean,") != std::string::npos);

  ExperimentPlan empty = plan;
  empty.source_targets = {"power"};
  empty.destination_targets = {"power"};
  CHECK_THROWS_AS(run_cross_target(empty, bundle, encoder, options), ConfigError);

  std::ostringstream out;
  print_cross_target(out, report);
  CHECK(out.str().find("power") != std::string::npos);
}

TEST_CASE("depth report re-slices a checkpoint by bucket") {
  CorpusBundle bundle = small_bundle();
  encoding::HashedEncoder encoder(8, 128, 3);

  training::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  glan::GlanConfig mc;
  mc.hidden_size = 8;
  training::Dataset all = training::prepare_dataset(
      bundle.instances, bundle.threads, encoder, training::Setting::WithHistory);
  training::TrainResult trained = training::train(tc, mc, all, all,
                                                  {{"train.setting", "with_history"}});

  MetricsReport report = run_depth_report(trained.checkpoint, bundle.instances,
                                          bundle.threads, encoder);
  CHECK(report.pooled.support == static_cast<long>(bundle.instances.size()));
  long bucket_total = 0;
  for (const auto& [index, bucket] : report.buckets) {
    bucket_total += bucket.metrics.support;
  }
  CHECK(bucket_total == report.pooled.support);
}

TEST_CASE("ablation grid covers the variants plus the full reference") {
  CorpusBundle bundle = small_bundle(24);
  encoding::HashedEncoder encoder(8, 128, 3);
  ExperimentPlan plan;
  plan.kind = ExperimentKind::Ablation;
  plan.seeds = {1};
  plan.variants = {"no-global", "no-global", "w/o Local"};
  RunOptions options = fast_options(8);

  AblationReport report = run_ablation(plan, bundle, encoder, options);
  REQUIRE(report.rows.size() == 3);  // dedup + appended "full"
  CHECK(report.rows[0].variant == "w/o Global");
  CHECK(report.rows[1].variant == "w/o Local");
  CHECK(report.rows[2].variant == "full");
  for (const auto& row : report.rows) {
    REQUIRE(row.per_seed.size() == 1);
    CHECK(row.mean_f_avg == doctest::Approx(row.per_seed[0].f_avg));
    CHECK(row.mean_train_f_avg >= 0.0);
    CHECK(row.mean_train_f_avg <= 100.0);
  }

  std::string csv = ablation_report_to_csv(report);
  CHECK(csv.rfind("variant,seed,f_avg,train_f_avg\n", 0) == 0);
  CHECK(csv.find("w/o Global,1,") != std::string::npos);
  CHECK(csv.find("full,mean,") != std::string::npos);

  std::ostringstream out;
  print_ablation(out, report);
  CHECK(out.str().find("w/o Global") != std::string::npos);

  ExperimentPlan bad = plan;
  bad.variants = {"no-everything"};
  CHECK_THROWS_AS(run_ablation(bad, bundle, encoder, options), ConfigError);
}
