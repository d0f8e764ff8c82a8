#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stance/label.hpp"

namespace stance::evaluation {

// 3x3 gold-by-predicted count matrix; slot order follows the Stance enum.
struct ConfusionMatrix {
  std::array<std::array<long, kNumStances>, kNumStances> counts{};

  void add(Stance gold, Stance pred, long n = 1) {
    counts[static_cast<int>(gold)][static_cast<int>(pred)] += n;
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  long total() const;
  long gold_count(Stance cls) const;
};

// F1 on the percent scale; 0 by convention when precision + recall = 0
// (which covers a class absent from both gold and predictions).
double f1_from_confusion(const ConfusionMatrix& cm, Stance cls);
double f1_per_class(const std::vector<Stance>& gold, const std::vector<Stance>& pred,
                    Stance cls);

// Mean of F1_against and F1_favor.
double f_avg_from_confusion(const ConfusionMatrix& cm);
double f_avg(const std::vector<Stance>& gold, const std::vector<Stance>& pred);

struct TargetMetrics {
  double f1_against = 0.0;
  double f1_favor = 0.0;
  double f_avg = 0.0;
  long support = 0;
};

TargetMetrics metrics_from_confusion(const ConfusionMatrix& cm);

struct BucketReport {
  std::string name;  // "1-2", "3-5", "6-8", ">=9"
  ConfusionMatrix confusion;
  TargetMetrics metrics;
};

struct MetricsReport {
  std::map<std::string, TargetMetrics> per_target;
  std::map<std::string, ConfusionMatrix> per_target_confusion;
  double average_f_avg = 0.0;   // unweighted mean of per-target F_avg
  ConfusionMatrix confusion;    // pooled over all instances
  TargetMetrics pooled;         // computed from the pooled confusion
  std::map<int, BucketReport> buckets;  // depth bucket index -> sub-report
};

struct LabeledPrediction {
  std::string target;
  int depth = 1;
  Stance gold = Stance::None;
  Stance pred = Stance::None;
};

// Assembles the full report (per-target, pooled, depth buckets) from scored
// predictions. Empty input is a configuration error.
MetricsReport report_from_predictions(const std::vector<LabeledPrediction>& predictions);

// CSV rows target/<name>, bucket/<name>, overall (pooled confusion), and
// average (unweighted per-target means); columns f1_against, f1_favor,
// f_avg, support.
std::string report_to_csv(const MetricsReport& report);

// Aligned human-readable rendering of the same rows.
void print_report(std::ostream& out, const MetricsReport& report);

}  // namespace stance::evaluation
