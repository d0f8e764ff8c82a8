#include "stance/experiments.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <set>

#include "csv_util.hpp"
#include "stance/errors.hpp"

namespace stance::evaluation {

namespace {

using training::Dataset;
using training::Setting;
using training::TrainConfig;

std::map<std::string, const corpus::StanceInstance*> index_instances(
    const CorpusBundle& bundle) {
  std::map<std::string, const corpus::StanceInstance*> by_id;
  for (const corpus::StanceInstance& inst : bundle.instances) {
    by_id[inst.instance_id] = &inst;
  }
  return by_id;
}

// Resolves split ids to instances, optionally keeping one target only.
std::vector<corpus::StanceInstance> select_instances(
    const std::map<std::string, const corpus::StanceInstance*>& by_id,
    const std::vector<std::string>& ids, const std::string& target_filter) {
  std::vector<corpus::StanceInstance> out;
  for (const std::string& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw IntegrityError("split references unknown instance " + id);
    }
    if (target_filter.empty() || it->second->target == target_filter) {
      out.push_back(*it->second);
    }
  }
  return out;
}

std::vector<std::string> all_targets(const CorpusBundle& bundle) {
  std::set<std::string> targets;
  for (const corpus::StanceInstance& inst : bundle.instances) {
    targets.insert(inst.target);
  }
  return {targets.begin(), targets.end()};
}

double mean_of(const std::vector<SeedScore>& scores) {
  double sum = 0.0;
  for (const SeedScore& s : scores) sum += s.f_avg;
  return scores.empty() ? 0.0 : sum / static_cast<double>(scores.size());
}

// One (train, evaluate-on-test) run; returns the pooled test F_avg.
double run_once(const TrainConfig& tc, const glan::GlanConfig& model,
                const Dataset& train_set, const Dataset& val_set,
                const Dataset& test_set,
                const std::map<std::string, std::string>& snapshot,
                double* train_f_avg = nullptr) {
  const training::TrainResult result =
      training::train(tc, model, train_set, val_set, snapshot);
  const glan::GlanModel trained = training::model_from_checkpoint(result.checkpoint);
  if (train_f_avg) {
    *train_f_avg = training::evaluate(trained, train_set).pooled.f_avg;
  }
  return training::evaluate(trained, test_set).pooled.f_avg;
}

}  // namespace

void ExperimentPlan::validate() const {
  if (seeds.empty()) throw ConfigError("experiment plan needs at least one seed");
  if (kind == ExperimentKind::CrossTarget) {
    if (source_targets.empty() || destination_targets.empty()) {
      throw ConfigError("cross-target plan needs source and destination targets");
    }
    if (source_targets.size() == 1 && destination_targets.size() == 1 &&
        source_targets.front() == destination_targets.front()) {
      throw ConfigError("cross-target source and destination must differ");
    }
  }
}

InTargetReport run_in_target(const ExperimentPlan& plan, const CorpusBundle& corpus,
                             const encoding::ContextualEncoder& encoder,
                             const RunOptions& options) {
  plan.validate();
  const auto by_id = index_instances(corpus);
  std::vector<std::string> targets =
      plan.source_targets.empty() ? all_targets(corpus) : plan.source_targets;
  if (targets.empty()) throw ConfigError("corpus has no targets to evaluate");

  InTargetReport report;
  for (const Setting setting : {Setting::SentenceOnly, Setting::WithHistory}) {
    std::vector<InTargetRow>& rows = setting == Setting::SentenceOnly
                                         ? report.sentence_only
                                         : report.with_history;
    for (const std::string& target : targets) {
      const auto train_insts = select_instances(by_id, corpus.split.train, target);
      const auto val_insts = select_instances(by_id, corpus.split.validation, target);
      const auto test_insts = select_instances(by_id, corpus.split.test, target);
      if (train_insts.empty() || val_insts.empty() || test_insts.empty()) {
        throw ConfigError("target '" + target +
                          "' is missing instances in one of the split portions");
      }
      const Dataset train_set =
          training::prepare_dataset(train_insts, corpus.threads, encoder, setting);
      const Dataset val_set =
          training::prepare_dataset(val_insts, corpus.threads, encoder, setting);
      const Dataset test_set =
          training::prepare_dataset(test_insts, corpus.threads, encoder, setting);

      InTargetRow row;
      row.target = target;
      for (const std::uint64_t seed : plan.seeds) {
        TrainConfig tc = options.train;
        tc.seed = seed;
        tc.setting = setting;
        auto snapshot = options.config_snapshot;
        snapshot["seed"] = std::to_string(seed);
        snapshot["train.setting"] = to_string(setting);
        row.per_seed.push_back(
            {seed, run_once(tc, options.model, train_set, val_set, test_set, snapshot)});
      }
      row.mean_f_avg = mean_of(row.per_seed);
      rows.push_back(std::move(row));
    }
  }

  double so_sum = 0.0, wh_sum = 0.0;
  for (const InTargetRow& r : report.sentence_only) so_sum += r.mean_f_avg;
  for (const InTargetRow& r : report.with_history) wh_sum += r.mean_f_avg;
  report.sentence_only_average = so_sum / static_cast<double>(targets.size());
  report.with_history_average = wh_sum / static_cast<double>(targets.size());
  return report;
}

CrossTargetReport run_cross_target(const ExperimentPlan& plan,
                                   const CorpusBundle& corpus,
                                   const encoding::ContextualEncoder& encoder,
                                   const RunOptions& options) {
  plan.validate();
  if (plan.source_targets.empty() || plan.destination_targets.empty()) {
    throw ConfigError("cross-target plan needs source and destination targets");
  }
  const auto by_id = index_instances(corpus);

  CrossTargetReport report;
  for (const std::string& source : plan.source_targets) {
    for (const std::string& destination : plan.destination_targets) {
      if (source == destination) continue;  // grids skip the diagonal

      // Training pool: the source's train and validation portions; the
      // validation subset also drives checkpoint selection.
      auto train_insts = select_instances(by_id, corpus.split.train, source);
      const auto val_insts = select_instances(by_id, corpus.split.validation, source);
      train_insts.insert(train_insts.end(), val_insts.begin(), val_insts.end());
      const auto test_insts = select_instances(by_id, corpus.split.test, destination);
      if (train_insts.empty() || val_insts.empty()) {
        throw ConfigError("source target '" + source + "' has no training instances");
      }
      if (test_insts.empty()) {
        throw ConfigError("destination target '" + destination +
                          "' has no test instances");
      }
      const Setting setting = options.train.setting;
      const Dataset train_set =
          training::prepare_dataset(train_insts, corpus.threads, encoder, setting);
      const Dataset val_set =
          training::prepare_dataset(val_insts, corpus.threads, encoder, setting);
      const Dataset test_set =
          training::prepare_dataset(test_insts, corpus.threads, encoder, setting);

      CrossTargetCell cell;
      cell.source = source;
      cell.destination = destination;
      for (const std::uint64_t seed : plan.seeds) {
        TrainConfig tc = options.train;
        tc.seed = seed;
        auto snapshot = options.config_snapshot;
        snapshot["seed"] = std::to_string(seed);
        cell.per_seed.push_back(
            {seed, run_once(tc, options.model, train_set, val_set, test_set, snapshot)});
      }
      cell.mean_f_avg = mean_of(cell.per_seed);
      report.cells.push_back(std::move(cell));
    }
  }
  if (report.cells.empty()) {
    throw ConfigError("cross-target plan produced no (source, destination) pairs");
  }
  return report;
}

MetricsReport run_depth_report(const training::Checkpoint& checkpoint,
                               const std::vector<corpus::StanceInstance>& instances,
                               const std::vector<corpus::ConversationThread>& threads,
                               const encoding::ContextualEncoder& encoder) {
  return training::evaluate(checkpoint, instances, threads, encoder);
}

std::string canonical_variant_name(const std::string& name) {
  if (name == "full") return "full";
  if (name == "w/o Global" || name == "no-global") return "w/o Global";
  if (name == "w/o Local" || name == "no-local") return "w/o Local";
  if (name == "w/o Structural" || name == "no-structural") return "w/o Structural";
  if (name == "w/o Target-attention" || name == "no-target-attention") {
    return "w/o Target-attention";
  }
  throw ConfigError("unknown ablation variant '" + name +
                    "' (expected full, no-global, no-local, no-structural, or "
                    "no-target-attention)");
}

namespace {

glan::GlanConfig variant_config(const glan::GlanConfig& base, const std::string& variant) {
  glan::GlanConfig out = base;
  if (variant == "w/o Global") out.use_global = false;
  if (variant == "w/o Local") out.use_local = false;
  if (variant == "w/o Structural") out.use_structural = false;
  if (variant == "w/o Target-attention") out.use_target_attention = false;
  out.validate();
  return out;
}

}  // namespace

AblationReport run_ablation(const ExperimentPlan& plan, const CorpusBundle& corpus,
                            const encoding::ContextualEncoder& encoder,
                            const RunOptions& options) {
  plan.validate();
  if (plan.variants.empty()) {
    throw ConfigError("ablation plan needs at least one variant");
  }
  std::vector<std::string> variants;
  for (const std::string& v : plan.variants) {
    const std::string canonical = canonical_variant_name(v);
    if (std::find(variants.begin(), variants.end(), canonical) == variants.end()) {
      variants.push_back(canonical);
    }
  }
  if (std::find(variants.begin(), variants.end(), "full") == variants.end()) {
    variants.push_back("full");  // reference row
  }

  const auto by_id = index_instances(corpus);
  const auto train_insts = select_instances(by_id, corpus.split.train, "");
  const auto val_insts = select_instances(by_id, corpus.split.validation, "");
  const auto test_insts = select_instances(by_id, corpus.split.test, "");
  if (train_insts.empty() || val_insts.empty() || test_insts.empty()) {
    throw ConfigError("ablation requires nonempty train/validation/test portions");
  }
  const Setting setting = options.train.setting;
  const Dataset train_set =
      training::prepare_dataset(train_insts, corpus.threads, encoder, setting);
  const Dataset val_set =
      training::prepare_dataset(val_insts, corpus.threads, encoder, setting);
  const Dataset test_set =
      training::prepare_dataset(test_insts, corpus.threads, encoder, setting);

  AblationReport report;
  for (const std::string& variant : variants) {
    const glan::GlanConfig model = variant_config(options.model, variant);
    AblationRow row;
    row.variant = variant;
    double train_sum = 0.0;
    for (const std::uint64_t seed : plan.seeds) {
      TrainConfig tc = options.train;
      tc.seed = seed;
      auto snapshot = options.config_snapshot;
      snapshot["seed"] = std::to_string(seed);
      snapshot["ablation.variant"] = variant;
      double train_f = 0.0;
      row.per_seed.push_back({seed, run_once(tc, model, train_set, val_set, test_set,
                                             snapshot, &train_f)});
      train_sum += train_f;
    }
    row.mean_f_avg = mean_of(row.per_seed);
    row.mean_train_f_avg = train_sum / static_cast<double>(plan.seeds.size());
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

void seed_rows(std::string& out, const std::string& prefix,
               const std::vector<SeedScore>& per_seed, double mean) {
  for (const SeedScore& s : per_seed) {
    out += prefix + ',' + std::to_string(s.seed) + ',' +
           detail::format_fixed(s.f_avg, 4) + '\n';
  }
  out += prefix + ",mean," + detail::format_fixed(mean, 4) + '\n';
}

}  // namespace

std::string in_target_report_to_csv(const InTargetReport& report) {
  std::string out = "target,setting,seed,f_avg\n";
  const auto emit = [&out](const std::vector<InTargetRow>& rows,
                           const std::string& setting) {
    for (const InTargetRow& r : rows) {
      seed_rows(out, detail::csv_escape(r.target) + ',' + setting, r.per_seed,
                r.mean_f_avg);
    }
  };
  emit(report.sentence_only, "sentence_only");
  emit(report.with_history, "with_history");
  out += "all,sentence_only,mean," +
         detail::format_fixed(report.sentence_only_average, 4) + '\n';
  out += "all,with_history,mean," +
         detail::format_fixed(report.with_history_average, 4) + '\n';
  return out;
}

std::string cross_target_report_to_csv(const CrossTargetReport& report) {
  std::string out = "source,destination,seed,f_avg\n";
  for (const CrossTargetCell& c : report.cells) {
    seed_rows(out, detail::csv_escape(c.source) + ',' + detail::csv_escape(c.destination),
              c.per_seed, c.mean_f_avg);
  }
  return out;
}

std::string ablation_report_to_csv(const AblationReport& report) {
  std::string out = "variant,seed,f_avg,train_f_avg\n";
  for (const AblationRow& r : report.rows) {
    for (const SeedScore& s : r.per_seed) {
      out += detail::csv_escape(r.variant) + ',' + std::to_string(s.seed) + ',' +
             detail::format_fixed(s.f_avg, 4) + ",\n";
    }
    out += detail::csv_escape(r.variant) + ",mean," +
           detail::format_fixed(r.mean_f_avg, 4) + ',' +
           detail::format_fixed(r.mean_train_f_avg, 4) + '\n';
  }
  return out;
}

void print_in_target(std::ostream& out, const InTargetReport& report) {
  const auto emit = [&out](const std::vector<InTargetRow>& rows,
                           const std::string& setting, double average) {
    out << "  setting: " << setting << "\n";
    for (const InTargetRow& r : rows) {
      out << "    " << std::left << std::setw(24) << r.target << std::right;
      for (const SeedScore& s : r.per_seed) {
        out << "  seed " << s.seed << ": " << std::fixed << std::setprecision(2)
            << s.f_avg;
      }
      out << "  mean: " << std::fixed << std::setprecision(2) << r.mean_f_avg << "\n";
    }
    out << "    average F_avg: " << std::fixed << std::setprecision(2) << average
        << "\n";
  };
  emit(report.sentence_only, "sentence_only", report.sentence_only_average);
  emit(report.with_history, "with_history", report.with_history_average);
}

void print_cross_target(std::ostream& out, const CrossTargetReport& report) {
  for (const CrossTargetCell& c : report.cells) {
    out << "  " << std::left << std::setw(20) << (c.source + " -> " + c.destination)
        << std::right;
    for (const SeedScore& s : c.per_seed) {
      out << "  seed " << s.seed << ": " << std::fixed << std::setprecision(2)
          << s.f_avg;
    }
    out << "  mean: " << std::fixed << std::setprecision(2) << c.mean_f_avg << "\n";
  }
}

void print_ablation(std::ostream& out, const AblationReport& report) {
  for (const AblationRow& r : report.rows) {
    out << "  " << std::left << std::setw(24) << r.variant << std::right
        << "  test F_avg: " << std::fixed << std::setprecision(2) << r.mean_f_avg
        << "  train F_avg: " << r.mean_train_f_avg << "\n";
  }
}

}  // namespace stance::evaluation
