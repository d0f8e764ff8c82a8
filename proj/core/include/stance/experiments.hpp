#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/encoding.hpp"
#include "stance/evaluation.hpp"
#include "stance/glan.hpp"
#include "stance/training.hpp"

namespace stance::evaluation {

// Everything an experiment needs from disk: the threads, the labeled
// instances, and the split that partitions them.
struct CorpusBundle {
  std::vector<corpus::ConversationThread> threads;
  std::vector<corpus::StanceInstance> instances;
  corpus::CorpusSplit split;
};

enum class ExperimentKind { InTarget, CrossTarget, Depth, Ablation };

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::InTarget;
  std::vector<std::string> source_targets;       // empty -> every target
  std::vector<std::string> destination_targets;  // cross-target only
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<std::string> variants;  // ablation only

  void validate() const;
};

// Base configuration shared by every run of an experiment; the plan's seeds
// and settings override the corresponding fields per cell.
struct RunOptions {
  training::TrainConfig train;
  glan::GlanConfig model;
  std::map<std::string, std::string> config_snapshot;
};

struct SeedScore {
  std::uint64_t seed = 0;
  double f_avg = 0.0;
};

struct InTargetRow {
  std::string target;
  std::vector<SeedScore> per_seed;
  double mean_f_avg = 0.0;
};

struct InTargetReport {
  std::vector<InTargetRow> sentence_only;
  std::vector<InTargetRow> with_history;
  double sentence_only_average = 0.0;  // mean over targets of mean_f_avg
  double with_history_average = 0.0;
};

// Trains and evaluates per target under both settings with the plan's
// seeds; per-seed scores are pooled test F_avg.
InTargetReport run_in_target(const ExperimentPlan& plan, const CorpusBundle& corpus,
                             const encoding::ContextualEncoder& encoder,
                             const RunOptions& options);

struct CrossTargetCell {
  std::string source;
  std::string destination;
  std::vector<SeedScore> per_seed;
  double mean_f_avg = 0.0;
};

struct CrossTargetReport {
  std::vector<CrossTargetCell> cells;
};

// Ordered (source, destination) pairs with source != destination; training
// data is the source's train+validation portion, evaluation is the
// destination's test portion. Requesting a single identical pair is a
// configuration error; identical pairs inside larger grids are skipped.
CrossTargetReport run_cross_target(const ExperimentPlan& plan,
                                   const CorpusBundle& corpus,
                                   const encoding::ContextualEncoder& encoder,
                                   const RunOptions& options);

// Scores the given instances with a trained model and reports by depth
// bucket (buckets are part of every MetricsReport; this entry point exists
// so a saved checkpoint can be re-sliced without retraining).
MetricsReport run_depth_report(const training::Checkpoint& checkpoint,
                               const std::vector<corpus::StanceInstance>& instances,
                               const std::vector<corpus::ConversationThread>& threads,
                               const encoding::ContextualEncoder& encoder);

struct AblationRow {
  std::string variant;
  std::vector<SeedScore> per_seed;      // test F_avg
  double mean_f_avg = 0.0;              // test
  double mean_train_f_avg = 0.0;        // for overfit comparisons
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

// Canonical variant names: "full", "w/o Global", "w/o Local",
// "w/o Structural", "w/o Target-attention" (compact aliases no-global,
// no-local, no-structural, no-target-attention are accepted). The full model
// is appended as a reference row when not requested.
AblationReport run_ablation(const ExperimentPlan& plan, const CorpusBundle& corpus,
                            const encoding::ContextualEncoder& encoder,
                            const RunOptions& options);

std::string canonical_variant_name(const std::string& name);

std::string in_target_report_to_csv(const InTargetReport& report);
std::string cross_target_report_to_csv(const CrossTargetReport& report);
std::string ablation_report_to_csv(const AblationReport& report);

void print_in_target(std::ostream& out, const InTargetReport& report);
void print_cross_target(std::ostream& out, const CrossTargetReport& report);
void print_ablation(std::ostream& out, const AblationReport& report);

}  // namespace stance::evaluation
