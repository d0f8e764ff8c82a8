#pragma once

#include <map>
#include <string>
#include <vector>

#include "stance/label.hpp"

namespace stance::annotation {

struct AnnotationRecord {
  std::string instance_id;
  std::string annotator_id;
  Stance label = Stance::None;
  bool related = true;  // annotator's target-relatedness flag
};

// Outcome of resolving all annotations for one instance. The two initial
// annotators are the two lowest annotator ids; when they disagree, a strict
// majority over all records decides, and the absence of one escalates.
struct Adjudication {
  enum class Outcome { Decided, Escalate };
  Outcome outcome = Outcome::Escalate;
  Stance label = Stance::None;  // valid iff outcome == Decided
  std::string instance_id;
};

Adjudication adjudicate(const std::vector<AnnotationRecord>& records);

// Chance-corrected agreement over the subset of pairs where both labels are
// favor or against. Throws UndefinedStatistic when no pair survives.
double cohen_kappa(const std::vector<Stance>& labels_a,
                   const std::vector<Stance>& labels_b);

// Mean over instances of the indicator that the two initial annotators gave
// identical labels.
double agreement_rate(
    const std::map<std::string, std::vector<AnnotationRecord>>& by_instance);

struct AgreementReport {
  struct Row {
    std::string target;
    double kappa = 0.0;
    double consistency = 0.0;
    long instances = 0;
  };
  std::vector<Row> per_target;
  double avg_kappa = 0.0;
  double avg_consistency = 0.0;
};

// Per-target kappa (pooled over the two initial annotators' labels) and
// consistency, plus unweighted averages across targets. Instances whose id
// is missing from instance_targets are skipped.
AgreementReport agreement_report(
    const std::vector<AnnotationRecord>& records,
    const std::map<std::string, std::string>& instance_targets);

// JSONL: {"instance_id", "annotator_id", "label", "related"}
std::vector<AnnotationRecord> load_annotations_jsonl(const std::string& path);
void save_annotations_jsonl(const std::string& path,
                            const std::vector<AnnotationRecord>& records);

// CSV with columns target,kappa,consistency plus a trailing average row.
std::string agreement_report_to_csv(const AgreementReport& report);

// Convenience: records grouped by instance id with deterministic ordering.
std::map<std::string, std::vector<AnnotationRecord>> group_by_instance(
    const std::vector<AnnotationRecord>& records);

}  // namespace stance::annotation
