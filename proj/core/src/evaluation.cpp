#include "stance/evaluation.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include "csv_util.hpp"
#include "stance/corpus.hpp"
#include "stance/errors.hpp"

namespace stance::evaluation {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (int g = 0; g < kNumStances; ++g) {
    for (int p = 0; p < kNumStances; ++p) counts[g][p] += other.counts[g][p];
  }
  return *this;
}

long ConfusionMatrix::total() const {
  long t = 0;
  for (const auto& row : counts) {
    for (long c : row) t += c;
  }
  return t;
}

long ConfusionMatrix::gold_count(Stance cls) const {
  long t = 0;
  for (long c : counts[static_cast<int>(cls)]) t += c;
  return t;
}

double f1_from_confusion(const ConfusionMatrix& cm, Stance cls) {
  const int k = static_cast<int>(cls);
  long tp = cm.counts[k][k];
  long fp = 0, fn = 0;
  for (int i = 0; i < kNumStances; ++i) {
    if (i != k) {
      fp += cm.counts[i][k];
      fn += cm.counts[k][i];
    }
  }
  const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

namespace {

ConfusionMatrix confusion_of(const std::vector<Stance>& gold,
                             const std::vector<Stance>& pred) {
  if (gold.size() != pred.size()) {
    throw ContractViolation("gold and predicted label lists differ in length (" +
                            std::to_string(gold.size()) + " vs " +
                            std::to_string(pred.size()) + ")");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], pred[i]);
  return cm;
}

}  // namespace

double f1_per_class(const std::vector<Stance>& gold, const std::vector<Stance>& pred,
                    Stance cls) {
  return f1_from_confusion(confusion_of(gold, pred), cls);
}

double f_avg_from_confusion(const ConfusionMatrix& cm) {
  return 0.5 * (f1_from_confusion(cm, Stance::Against) +
                f1_from_confusion(cm, Stance::Favor));
}

double f_avg(const std::vector<Stance>& gold, const std::vector<Stance>& pred) {
  return f_avg_from_confusion(confusion_of(gold, pred));
}

TargetMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
  TargetMetrics m;
  m.f1_against = f1_from_confusion(cm, Stance::Against);
  m.f1_favor = f1_from_confusion(cm, Stance::Favor);
  m.f_avg = 0.5 * (m.f1_against + m.f1_favor);
  m.support = cm.total();
  return m;
}

MetricsReport report_from_predictions(const std::vector<LabeledPrediction>& predictions) {
  if (predictions.empty()) {
    throw ConfigError("cannot build a metrics report from zero predictions");
  }
  MetricsReport report;
  for (const LabeledPrediction& p : predictions) {
    report.confusion.add(p.gold, p.pred);
    report.per_target_confusion[p.target].add(p.gold, p.pred);
    const int bucket = corpus::depth_bucket_index(p.depth);
    BucketReport& br = report.buckets[bucket];
    br.name = corpus::depth_bucket_name(p.depth);
    br.confusion.add(p.gold, p.pred);
  }
  double f_sum = 0.0;
  for (const auto& [target, cm] : report.per_target_confusion) {
    report.per_target[target] = metrics_from_confusion(cm);
    f_sum += report.per_target[target].f_avg;
  }
  report.average_f_avg = f_sum / static_cast<double>(report.per_target.size());
  report.pooled = metrics_from_confusion(report.confusion);
  for (auto& [index, bucket] : report.buckets) {
    bucket.metrics = metrics_from_confusion(bucket.confusion);
  }
  return report;
}

namespace {

void csv_row(std::string& out, const std::string& name, const TargetMetrics& m) {
  out += detail::csv_escape(name);
  out += ',' + detail::format_fixed(m.f1_against, 4);
  out += ',' + detail::format_fixed(m.f1_favor, 4);
  out += ',' + detail::format_fixed(m.f_avg, 4);
  out += ',' + std::to_string(m.support);
  out += '\n';
}

}  // namespace

std::string report_to_csv(const MetricsReport& report) {
  std::string out = "row,f1_against,f1_favor,f_avg,support\n";
  TargetMetrics average;
  for (const auto& [target, m] : report.per_target) {
    csv_row(out, "target/" + target, m);
    average.f1_against += m.f1_against;
    average.f1_favor += m.f1_favor;
    average.f_avg += m.f_avg;
    average.support += m.support;
  }
  const double n = static_cast<double>(report.per_target.size());
  average.f1_against /= n;
  average.f1_favor /= n;
  average.f_avg /= n;
  for (const auto& [index, bucket] : report.buckets) {
    csv_row(out, "bucket/" + bucket.name, bucket.metrics);
  }
  csv_row(out, "overall", report.pooled);
  csv_row(out, "average", average);
  return out;
}

void print_report(std::ostream& out, const MetricsReport& report) {
  const auto line = [&out](const std::string& name, const TargetMetrics& m) {
    out << "  " << std::left << std::setw(28) << name << std::right << std::fixed
        << std::setprecision(2) << std::setw(10) << m.f1_against << std::setw(10)
        << m.f1_favor << std::setw(10) << m.f_avg << std::setw(10) << m.support
        << "\n";
  };
  out << "  " << std::left << std::setw(28) << "row" << std::right << std::setw(10)
      << "f1_against" << std::setw(10) << "f1_favor" << std::setw(10) << "f_avg"
      << std::setw(10) << "support" << "\n";
  for (const auto& [target, m] : report.per_target) line("target/" + target, m);
  for (const auto& [index, bucket] : report.buckets) {
    line("bucket/" + bucket.name, bucket.metrics);
  }
  line("overall", report.pooled);
  out << "  average F_avg over targets: " << std::fixed << std::setprecision(2)
      << report.average_f_avg << "\n";
}

}  // namespace stance::evaluation
