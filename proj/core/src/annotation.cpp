#include "stance/annotation.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include <json.hpp>

#include "stance/errors.hpp"
#include "csv_util.hpp"

namespace stance::annotation {

using nlohmann::json;
using nlohmann::ordered_json;

Adjudication adjudicate(const std::vector<AnnotationRecord>& records) {
  if (records.size() < 2) {
    throw IntegrityError("instance needs at least two annotations, got " +
                         std::to_string(records.size()));
  }
  const std::string& instance_id = records.front().instance_id;
  for (const auto& r : records) {
    if (r.instance_id != instance_id) {
      throw IntegrityError("adjudicate received records for mixed instances: '" +
                           instance_id + "' and '" + r.instance_id + "'");
    }
  }

  // Initial annotators = two lowest annotator ids, for deterministic replay.
  std::vector<const AnnotationRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const AnnotationRecord* a, const AnnotationRecord* b) {
              return a->annotator_id < b->annotator_id;
            });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->annotator_id == sorted[i - 1]->annotator_id) {
      throw IntegrityError("instance '" + instance_id + "': duplicate annotator '" +
                           sorted[i]->annotator_id + "'");
    }
  }

  if (sorted[0]->label == sorted[1]->label) {
    return {Adjudication::Outcome::Decided, sorted[0]->label, instance_id};
  }
  if (records.size() == 2) {
    return {Adjudication::Outcome::Escalate, Stance::None, instance_id};
  }

  std::array<int, kNumStances> votes{};
  for (const auto& r : records) votes[static_cast<int>(r.label)] += 1;
  int best = 0;
  for (int i = 1; i < kNumStances; ++i) {
    if (votes[i] > votes[best]) best = i;
  }
  bool strict = true;
  for (int i = 0; i < kNumStances; ++i) {
    if (i != best && votes[i] == votes[best]) strict = false;
  }
  if (!strict) {
    return {Adjudication::Outcome::Escalate, Stance::None, instance_id};
  }
  return {Adjudication::Outcome::Decided, static_cast<Stance>(best), instance_id};
}

double cohen_kappa(const std::vector<Stance>& labels_a,
                   const std::vector<Stance>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw ContractViolation("cohen_kappa: sequences differ in length (" +
                            std::to_string(labels_a.size()) + " vs " +
                            std::to_string(labels_b.size()) + ")");
  }
  auto is_stance = [](Stance s) { return s == Stance::Favor || s == Stance::Against; };

  long m = 0;
  long agree = 0;
  std::array<long, 2> count_a{};  // [favor, against]
  std::array<long, 2> count_b{};
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    if (!is_stance(labels_a[i]) || !is_stance(labels_b[i])) continue;
    ++m;
    if (labels_a[i] == labels_b[i]) ++agree;
    count_a[labels_a[i] == Stance::Favor ? 0 : 1] += 1;
    count_b[labels_b[i] == Stance::Favor ? 0 : 1] += 1;
  }
  if (m == 0) {
    throw UndefinedStatistic(
        "cohen_kappa: no pair where both labels are favor/against");
  }

  // Integer chance-agreement test: p_e == 1 iff sum_k ca_k*cb_k == m^2, which
  // forces p_o == 1 as well; kappa is 1 by convention there.
  long chance_num = count_a[0] * count_b[0] + count_a[1] * count_b[1];
  if (chance_num == m * m) return 1.0;

  double p_o = static_cast<double>(agree) / static_cast<double>(m);
  double p_e = static_cast<double>(chance_num) / (static_cast<double>(m) * m);
  return (p_o - p_e) / (1.0 - p_e);
}

namespace {

// The two records with the lowest annotator ids, in id order.
std::pair<const AnnotationRecord*, const AnnotationRecord*> initial_pair(
    const std::vector<AnnotationRecord>& records) {
  if (records.size() < 2) {
    throw IntegrityError("instance '" +
                         (records.empty() ? std::string("?") : records[0].instance_id) +
                         "' needs at least two annotations");
  }
  const AnnotationRecord* lo = nullptr;
  const AnnotationRecord* hi = nullptr;
  for (const auto& r : records) {
    if (!lo || r.annotator_id < lo->annotator_id) {
      hi = lo;
      lo = &r;
    } else if (!hi || r.annotator_id < hi->annotator_id) {
      hi = &r;
    }
  }
  return {lo, hi};
}

}  // namespace

double agreement_rate(
    const std::map<std::string, std::vector<AnnotationRecord>>& by_instance) {
  if (by_instance.empty()) {
    throw UndefinedStatistic("agreement_rate: no instances");
  }
  long agree = 0;
  for (const auto& [id, records] : by_instance) {
    (void)id;
    auto [a, b] = initial_pair(records);
    if (a->label == b->label) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(by_instance.size());
}

std::map<std::string, std::vector<AnnotationRecord>> group_by_instance(
    const std::vector<AnnotationRecord>& records) {
  std::map<std::string, std::vector<AnnotationRecord>> grouped;
  for (const auto& r : records) grouped[r.instance_id].push_back(r);
  return grouped;
}

AgreementReport agreement_report(
    const std::vector<AnnotationRecord>& records,
    const std::map<std::string, std::string>& instance_targets) {
  auto grouped = group_by_instance(records);

  struct PerTarget {
    std::vector<Stance> a, b;
    std::map<std::string, std::vector<AnnotationRecord>> instances;
  };
  std::map<std::string, PerTarget> targets;
  for (const auto& [instance_id, recs] : grouped) {
    auto it = instance_targets.find(instance_id);
    if (it == instance_targets.end()) continue;
    auto [lo, hi] = initial_pair(recs);
    PerTarget& t = targets[it->second];
    t.a.push_back(lo->label);
    t.b.push_back(hi->label);
    t.instances[instance_id] = recs;
  }

  AgreementReport report;
  for (const auto& [target, data] : targets) {
    AgreementReport::Row row;
    row.target = target;
    row.kappa = cohen_kappa(data.a, data.b);
    row.consistency = agreement_rate(data.instances);
    row.instances = static_cast<long>(data.instances.size());
    report.per_target.push_back(row);
  }
  if (!report.per_target.empty()) {
    for (const auto& row : report.per_target) {
      report.avg_kappa += row.kappa;
      report.avg_consistency += row.consistency;
    }
    report.avg_kappa /= static_cast<double>(report.per_target.size());
    report.avg_consistency /= static_cast<double>(report.per_target.size());
  }
  return report;
}

std::vector<AnnotationRecord> load_annotations_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open annotations file: " + path);
  std::vector<AnnotationRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw ParseError(where + ": not a JSON object");
    }
    AnnotationRecord r;
    for (const char* field : {"instance_id", "annotator_id", "label"}) {
      if (!doc.contains(field) || !doc[field].is_string()) {
        throw ParseError(where + ": missing string field '" + std::string(field) + "'");
      }
    }
    r.instance_id = doc["instance_id"].get<std::string>();
    r.annotator_id = doc["annotator_id"].get<std::string>();
    r.label = stance_from_string(doc["label"].get<std::string>());
    r.related = doc.value("related", true);
    records.push_back(std::move(r));
  }
  return records;
}

void save_annotations_jsonl(const std::string& path,
                            const std::vector<AnnotationRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write annotations file: " + path);
  for (const auto& r : records) {
    ordered_json doc;
    doc["instance_id"] = r.instance_id;
    doc["annotator_id"] = r.annotator_id;
    doc["label"] = to_string(r.label);
    doc["related"] = r.related;
    out << doc.dump() << "\n";
  }
}

std::string agreement_report_to_csv(const AgreementReport& report) {
  using detail::csv_escape;
  using detail::format_fixed;
  std::string out = "target,kappa,consistency\n";
  for (const auto& row : report.per_target) {
    out += csv_escape(row.target) + "," + format_fixed(row.kappa, 4) + "," +
           format_fixed(row.consistency, 4) + "\n";
  }
  out += "average," + format_fixed(report.avg_kappa, 4) + "," +
         format_fixed(report.avg_consistency, 4) + "\n";
  return out;
}

}  // namespace stance::annotation
