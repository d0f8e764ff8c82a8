// stance: command-line toolkit for conversational stance detection.
// Subcommands cover the full pipeline: forum ingestion, preprocessing,
// corpus statistics, annotation agreement, training, and the experiment
// harnesses (eval, cross-target, depth-report, ablate).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stance/annotation.hpp"
#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/encoding.hpp"
#include "stance/errors.hpp"
#include "stance/evaluation.hpp"
#include "stance/experiments.hpp"
#include "stance/glan.hpp"
#include "stance/ingest.hpp"
#include "stance/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- shared plumbing ---------------------------------------------------------

struct CommonFlags {
  std::string config_path;
  std::string seed;     // kept as text so "not given" is distinguishable
  std::string out_dir = ".";
  bool verbose = false;
};

void add_common(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path,
                  "flat key = value run configuration file");
  sub->add_option("--seed", flags.seed, "run seed (overrides the config file)");
  sub->add_option("--out-dir", flags.out_dir,
                  "directory for outputs and the run manifest");
  sub->add_flag("--verbose", flags.verbose, "chatty progress output");
}

stance::Config resolve_config(const CommonFlags& flags) {
  stance::Config config;
  if (!flags.config_path.empty()) {
    if (!fs::exists(flags.config_path)) {
      throw stance::ConfigError("config file not found: " + flags.config_path);
    }
    config = stance::Config::from_file(flags.config_path);
  }
  if (!flags.seed.empty()) config.set("seed", flags.seed);
  return config;
}

void require_input(const std::string& path, const std::string& what) {
  if (path.empty()) throw stance::ConfigError(what + " path is required");
  if (!fs::exists(path)) throw stance::ConfigError(what + " not found: " + path);
}

std::string join_out(const CommonFlags& flags, const std::string& name) {
  return (fs::path(flags.out_dir) / name).string();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw stance::Error("cannot write output file: " + path);
  out << content;
  if (!out) throw stance::Error("failed while writing output file: " + path);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stance::Error("cannot checksum output file: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Every run leaves one manifest beside its outputs: what ran, with which
// resolved configuration, over which files, and what came out.
class Manifest {
 public:
  Manifest(std::string command, const CommonFlags& flags, const stance::Config& config)
      : command_(std::move(command)), flags_(flags), config_(config.values()) {
    started_at_ = utc_timestamp();
    if (!flags.config_path.empty()) inputs_.push_back(flags.config_path);
  }

  void add_input(const std::string& path) { inputs_.push_back(path); }
  void add_output(const std::string& path) { outputs_.push_back(path); }
  void add_seed(std::uint64_t seed) { seeds_.push_back(seed); }

  void write() const {
    json doc;
    doc["command"] = command_;
    doc["config"] = config_;
    doc["inputs"] = inputs_;
    doc["outputs"] = outputs_;
    doc["seeds"] = seeds_;
    doc["started_at"] = started_at_;
    doc["finished_at"] = utc_timestamp();
    json checksums;
    for (const std::string& path : outputs_) {
      checksums[path] = file_checksum(path);
    }
    doc["checksums"] = checksums;
    write_text_file((fs::path(flags_.out_dir) / (command_ + ".manifest.json")).string(),
                    doc.dump(2) + "\n");
  }

 private:
  std::string command_;
  const CommonFlags& flags_;
  std::map<std::string, std::string> config_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  std::vector<std::uint64_t> seeds_;
  std::string started_at_;
};

std::vector<std::string> split_csv_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::uint64_t> resolve_seeds(const stance::Config& config,
                                         const std::string& seeds_flag) {
  const std::string text =
      !seeds_flag.empty() ? seeds_flag : config.get_string("experiment.seeds", "1,2,3");
  std::vector<std::uint64_t> seeds;
  for (const std::string& item : split_csv_list(text)) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw stance::ConfigError("invalid seed '" + item + "' in seed list");
    }
  }
  if (seeds.empty()) throw stance::ConfigError("seed list is empty");
  return seeds;
}

// Loads the three corpus files every experiment command needs.
stance::evaluation::CorpusBundle load_bundle(const std::string& threads_path,
                                             const std::string& instances_path,
                                             const std::string& split_path) {
  require_input(threads_path, "threads file");
  require_input(instances_path, "instances file");
  stance::evaluation::CorpusBundle bundle;
  bundle.threads = stance::corpus::load_threads_jsonl(threads_path);
  bundle.instances = stance::corpus::load_instances_jsonl(instances_path);
  if (!split_path.empty()) {
    require_input(split_path, "split file");
    bundle.split = stance::corpus::load_split_json(split_path);
  }
  return bundle;
}

stance::evaluation::RunOptions make_run_options(
    const stance::Config& config, const stance::encoding::ContextualEncoder& encoder) {
  stance::evaluation::RunOptions options;
  options.train = stance::training::TrainConfig::from_config(config);
  options.model = stance::glan::GlanConfig::from_config(config, encoder.hidden_size());
  options.config_snapshot = config.values();
  return options;
}

// --- subcommand bodies -------------------------------------------------------

struct IngestArgs {
  CommonFlags common;
  std::string endpoint, target, token, out;
  int pages = 0;
  int rpm = -1;
  int max_retries = -1;
};

void cmd_ingest(const IngestArgs& args) {
  stance::Config config = resolve_config(args.common);
  if (!args.endpoint.empty()) config.set("ingest.endpoint", args.endpoint);
  if (!args.target.empty()) config.set("ingest.target", args.target);
  if (!args.token.empty()) config.set("ingest.auth_token", args.token);
  if (args.rpm >= 0) config.set("ingest.rpm", std::to_string(args.rpm));
  if (args.max_retries >= 0) {
    config.set("ingest.max_retries", std::to_string(args.max_retries));
  }

  stance::ingest::EndpointConfig endpoint;
  endpoint.base_url = config.require_string("ingest.endpoint");
  endpoint.auth_token = config.get_string("ingest.auth_token", "");
  endpoint.requests_per_minute = static_cast<int>(config.get_int("ingest.rpm", 0));
  endpoint.max_retries = static_cast<int>(config.get_int("ingest.max_retries", 3));
  endpoint.backoff_initial_ms =
      static_cast<int>(config.get_int("ingest.backoff_initial_ms", 250));
  endpoint.backoff_cap_ms =
      static_cast<int>(config.get_int("ingest.backoff_cap_ms", 4000));
  const std::string target = config.require_string("ingest.target");
  const int pages =
      args.pages != 0 ? args.pages : static_cast<int>(config.get_int("ingest.pages", 0));

  fs::create_directories(args.common.out_dir);
  Manifest manifest("ingest", args.common, config);
  const stance::ingest::IngestResult result =
      stance::ingest::ingest_forum(endpoint, target, pages);

  const std::string out_path =
      args.out.empty() ? join_out(args.common, "threads.jsonl") : args.out;
  stance::corpus::save_threads_jsonl(out_path, result.threads);
  manifest.add_output(out_path);
  manifest.write();
  std::cout << "ingested " << result.threads.size() << " thread(s) from "
            << result.pages_fetched << " page(s), " << result.requests_made
            << " request(s)\n";
}

struct PreprocessArgs {
  CommonFlags common;
  std::string threads, votes, labels, out, rejects, split_out;
};

std::map<std::string, std::pair<bool, bool>> load_votes(const std::string& path) {
  std::map<std::string, std::pair<bool, bool>> votes;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stance::Error("cannot read votes file: " + path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.contains("thread_id") || !doc.contains("votes") ||
        !doc["votes"].is_array() || doc["votes"].size() != 2) {
      throw stance::ParseError("votes file line " + std::to_string(line_no) +
                               ": expected {\"thread_id\", \"votes\": [bool, bool]}");
    }
    votes[doc["thread_id"].get<std::string>()] = {doc["votes"][0].get<bool>(),
                                                  doc["votes"][1].get<bool>()};
  }
  return votes;
}

// Extra labels beside the ones embedded in the thread file:
// {"thread_id", "utterance_id", "label"} per line.
std::map<std::string, std::map<std::string, stance::Stance>> load_labels(
    const std::string& path) {
  std::map<std::string, std::map<std::string, stance::Stance>> labels;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stance::Error("cannot read labels file: " + path);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.contains("thread_id") ||
        !doc.contains("utterance_id") || !doc.contains("label")) {
      throw stance::ParseError(
          "labels file line " + std::to_string(line_no) +
          ": expected {\"thread_id\", \"utterance_id\", \"label\"}");
    }
    labels[doc["thread_id"].get<std::string>()]
          [doc["utterance_id"].get<std::string>()] =
              stance::stance_from_string(doc["label"].get<std::string>());
  }
  return labels;
}

void cmd_preprocess(const PreprocessArgs& args) {
  stance::Config config = resolve_config(args.common);
  require_input(args.threads, "threads file");

  stance::corpus::FilterRules rules;
  rules.min_comments = static_cast<int>(config.get_int("filter.min_comments", 200));
  rules.min_root_words = static_cast<int>(config.get_int("filter.min_root_words", 15));
  rules.max_root_words = static_cast<int>(config.get_int("filter.max_root_words", 150));
  rules.check_language = config.get_bool("filter.check_language", true);
  rules.min_ascii_letter_fraction =
      config.get_double("filter.min_ascii_letter_fraction", 0.9);

  const auto threads = stance::corpus::load_threads_jsonl(args.threads);
  std::map<std::string, std::pair<bool, bool>> votes;
  if (!args.votes.empty()) {
    require_input(args.votes, "votes file");
    votes = load_votes(args.votes);
  }
  std::map<std::string, std::map<std::string, stance::Stance>> extra_labels;
  if (!args.labels.empty()) {
    require_input(args.labels, "labels file");
    extra_labels = load_labels(args.labels);
  }

  fs::create_directories(args.common.out_dir);
  Manifest manifest("preprocess", args.common, config);
  manifest.add_input(args.threads);
  if (!args.votes.empty()) manifest.add_input(args.votes);
  if (!args.labels.empty()) manifest.add_input(args.labels);

  std::vector<stance::corpus::StanceInstance> instances;
  std::string reject_log = "thread_id,reason\n";
  std::map<std::string, long> reject_counts;
  long accepted = 0;
  for (const auto& thread : threads) {
    auto vote_it = votes.find(thread.thread_id());
    const std::pair<bool, bool> vote =
        vote_it == votes.end() ? std::pair<bool, bool>{true, true} : vote_it->second;
    const auto decision = stance::corpus::filter_post(thread, vote, rules);
    if (!decision.accepted) {
      reject_log += thread.thread_id() + "," + decision.reason + "\n";
      ++reject_counts[decision.reason];
      continue;
    }
    ++accepted;
    std::map<std::string, stance::Stance> labels;
    for (const auto& u : thread.utterances()) {
      if (u.label) labels[u.id] = *u.label;
    }
    auto extra = extra_labels.find(thread.thread_id());
    if (extra != extra_labels.end()) {
      for (const auto& [id, label] : extra->second) labels[id] = label;
    }
    const auto extracted = stance::corpus::extract_instances(thread, labels);
    instances.insert(instances.end(), extracted.begin(), extracted.end());
  }

  const std::string out_path =
      args.out.empty() ? join_out(args.common, "instances.jsonl") : args.out;
  const std::string rejects_path =
      args.rejects.empty() ? join_out(args.common, "rejections.csv") : args.rejects;
  stance::corpus::save_instances_jsonl(out_path, instances);
  write_text_file(rejects_path, reject_log);
  manifest.add_output(out_path);
  manifest.add_output(rejects_path);

  if (!args.split_out.empty()) {
    const std::uint64_t seed = config.get_seed("seed", 1);
    const auto split = stance::corpus::split_corpus(instances, seed);
    stance::corpus::save_split_json(args.split_out, split);
    manifest.add_output(args.split_out);
    manifest.add_seed(seed);
  }
  manifest.write();

  std::cout << "threads: " << threads.size() << "  accepted: " << accepted
            << "  rejected: " << (threads.size() - accepted)
            << "  instances: " << instances.size() << "\n";
  for (const auto& [reason, count] : reject_counts) {
    std::cout << "  rejected by " << reason << ": " << count << "\n";
  }
}

struct StatsArgs {
  CommonFlags common;
  std::string instances, out;
};

void cmd_stats(const StatsArgs& args) {
  stance::Config config = resolve_config(args.common);
  require_input(args.instances, "instances file");
  const auto instances = stance::corpus::load_instances_jsonl(args.instances);
  const auto stats = stance::corpus::corpus_stats(instances);

  fs::create_directories(args.common.out_dir);
  Manifest manifest("stats", args.common, config);
  manifest.add_input(args.instances);
  const std::string out_path =
      args.out.empty() ? join_out(args.common, "stats.csv") : args.out;
  write_text_file(out_path, stance::corpus::stats_to_csv(stats));
  manifest.add_output(out_path);
  manifest.write();

  std::cout << "instances: " << stats.total << "\n";
  for (const auto& [target, count] : stats.by_target) {
    std::cout << "  " << target << ": " << count << "\n";
  }
  for (const auto& [bucket, count] : stats.by_bucket) {
    std::cout << "  depth " << bucket << ": " << count << "\n";
  }
}

struct AgreeArgs {
  CommonFlags common;
  std::string annotations, instances, out;
};

void cmd_agree(const AgreeArgs& args) {
  stance::Config config = resolve_config(args.common);
  require_input(args.annotations, "annotations file");
  require_input(args.instances, "instances file");
  const auto records = stance::annotation::load_annotations_jsonl(args.annotations);
  const auto instances = stance::corpus::load_instances_jsonl(args.instances);
  std::map<std::string, std::string> targets;
  for (const auto& inst : instances) targets[inst.instance_id] = inst.target;

  const auto report = stance::annotation::agreement_report(records, targets);
  fs::create_directories(args.common.out_dir);
  Manifest manifest("agree", args.common, config);
  manifest.add_input(args.annotations);
  manifest.add_input(args.instances);
  const std::string out_path =
      args.out.empty() ? join_out(args.common, "agreement.csv") : args.out;
  write_text_file(out_path, stance::annotation::agreement_report_to_csv(report));
  manifest.add_output(out_path);
  manifest.write();

  for (const auto& row : report.per_target) {
    std::cout << "  " << row.target << "  kappa: " << row.kappa
              << "  consistency: " << row.consistency << "\n";
  }
  std::cout << "  average  kappa: " << report.avg_kappa
            << "  consistency: " << report.avg_consistency << "\n";
}

struct TrainArgs {
  CommonFlags common;
  std::string threads, instances, split, target, checkpoint_out, log_out;
};

void cmd_train(const TrainArgs& args) {
  stance::Config config = resolve_config(args.common);
  auto bundle = load_bundle(args.threads, args.instances, args.split);

  fs::create_directories(args.common.out_dir);
  Manifest manifest("train", args.common, config);
  manifest.add_input(args.threads);
  manifest.add_input(args.instances);
  if (!args.split.empty()) manifest.add_input(args.split);

  const auto train_config = stance::training::TrainConfig::from_config(config);
  manifest.add_seed(train_config.seed);
  if (args.split.empty()) {
    bundle.split = stance::corpus::split_corpus(bundle.instances, train_config.seed);
    const std::string split_path = join_out(args.common, "split.json");
    stance::corpus::save_split_json(split_path, bundle.split);
    manifest.add_output(split_path);
  }

  if (!args.target.empty()) {
    std::vector<stance::corpus::StanceInstance> kept;
    for (const auto& inst : bundle.instances) {
      if (inst.target == args.target) kept.push_back(inst);
    }
    if (kept.empty()) {
      throw stance::ConfigError("no instances for target '" + args.target + "'");
    }
    bundle.instances = std::move(kept);
  }

  const auto encoder = stance::encoding::make_encoder(config);
  const auto glan_config =
      stance::glan::GlanConfig::from_config(config, encoder->hidden_size());

  std::map<std::string, const stance::corpus::StanceInstance*> by_id;
  for (const auto& inst : bundle.instances) by_id[inst.instance_id] = &inst;
  const auto select = [&](const std::vector<std::string>& ids) {
    std::vector<stance::corpus::StanceInstance> out;
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it != by_id.end()) out.push_back(*it->second);
    }
    return out;
  };
  const auto train_set = stance::training::prepare_dataset(
      select(bundle.split.train), bundle.threads, *encoder, train_config.setting);
  const auto val_set = stance::training::prepare_dataset(
      select(bundle.split.validation), bundle.threads, *encoder, train_config.setting);

  const std::string log_path =
      args.log_out.empty() ? join_out(args.common, "train_log.jsonl") : args.log_out;
  std::ofstream log_stream(log_path, std::ios::binary);
  if (!log_stream) throw stance::Error("cannot write training log: " + log_path);

  const auto result = stance::training::train(train_config, glan_config, train_set,
                                              val_set, config.values(), &log_stream);
  log_stream.close();
  manifest.add_output(log_path);

  const std::string checkpoint_path = args.checkpoint_out.empty()
                                          ? join_out(args.common, "checkpoint.json")
                                          : args.checkpoint_out;
  stance::training::save_checkpoint(checkpoint_path, result.checkpoint);
  manifest.add_output(checkpoint_path);
  manifest.write();

  std::cout << "trained " << result.log.size() << " epoch(s); best epoch "
            << result.checkpoint.epoch << " with validation F_avg "
            << result.checkpoint.best_val_f_avg << "\n";
  if (args.common.verbose) {
    for (const auto& entry : result.log) {
      std::cout << "  epoch " << entry.epoch << "  loss " << entry.train_loss
                << "  val F_avg " << entry.val_f_avg << "\n";
    }
  }
}

struct EvalArgs {
  CommonFlags common;
  std::string checkpoint, threads, instances, split, portion = "test", out, seeds;
  bool in_target = false;
};

std::vector<stance::corpus::StanceInstance> split_portion(
    const stance::evaluation::CorpusBundle& bundle, const std::string& portion) {
  const std::vector<std::string>* ids = nullptr;
  if (portion == "train") ids = &bundle.split.train;
  if (portion == "validation") ids = &bundle.split.validation;
  if (portion == "test") ids = &bundle.split.test;
  if (!ids) {
    throw stance::ConfigError("unknown split portion '" + portion +
                              "' (expected train, validation, or test)");
  }
  std::map<std::string, const stance::corpus::StanceInstance*> by_id;
  for (const auto& inst : bundle.instances) by_id[inst.instance_id] = &inst;
  std::vector<stance::corpus::StanceInstance> out;
  for (const auto& id : *ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw stance::IntegrityError("split references unknown instance " + id);
    }
    out.push_back(*it->second);
  }
  return out;
}

void cmd_eval(const EvalArgs& args) {
  stance::Config config = resolve_config(args.common);
  fs::create_directories(args.common.out_dir);
  Manifest manifest("eval", args.common, config);

  if (args.in_target) {
    auto bundle = load_bundle(args.threads, args.instances, args.split);
    if (args.split.empty()) {
      throw stance::ConfigError("--in-target requires --split");
    }
    manifest.add_input(args.threads);
    manifest.add_input(args.instances);
    manifest.add_input(args.split);
    const auto encoder = stance::encoding::make_encoder(config);
    stance::evaluation::ExperimentPlan plan;
    plan.kind = stance::evaluation::ExperimentKind::InTarget;
    plan.seeds = resolve_seeds(config, args.seeds);
    for (const auto seed : plan.seeds) manifest.add_seed(seed);
    const auto options = make_run_options(config, *encoder);
    const auto report =
        stance::evaluation::run_in_target(plan, bundle, *encoder, options);
    const std::string out_path =
        args.out.empty() ? join_out(args.common, "in_target.csv") : args.out;
    write_text_file(out_path, stance::evaluation::in_target_report_to_csv(report));
    manifest.add_output(out_path);
    manifest.write();
    stance::evaluation::print_in_target(std::cout, report);
    return;
  }

  if (args.checkpoint.empty() || !fs::exists(args.checkpoint)) {
    throw stance::ConfigError("checkpoint not found: " +
                              (args.checkpoint.empty() ? "(no --checkpoint given)"
                                                       : args.checkpoint));
  }
  auto bundle = load_bundle(args.threads, args.instances, args.split);
  manifest.add_input(args.checkpoint);
  manifest.add_input(args.threads);
  manifest.add_input(args.instances);
  if (!args.split.empty()) manifest.add_input(args.split);

  const auto checkpoint = stance::training::load_checkpoint(args.checkpoint);
  stance::Config checkpoint_config;
  for (const auto& [k, v] : checkpoint.config) checkpoint_config.set(k, v);
  for (const auto& [k, v] : config.values()) checkpoint_config.set(k, v);
  const auto encoder = stance::encoding::make_encoder(checkpoint_config);

  const auto eval_instances =
      args.split.empty() ? bundle.instances : split_portion(bundle, args.portion);
  const auto report = stance::training::evaluate(checkpoint, eval_instances,
                                                 bundle.threads, *encoder);
  const std::string out_path =
      args.out.empty() ? join_out(args.common, "eval.csv") : args.out;
  write_text_file(out_path, stance::evaluation::report_to_csv(report));
  manifest.add_output(out_path);
  manifest.write();
  stance::evaluation::print_report(std::cout, report);
}

struct CrossArgs {
  CommonFlags common;
  std::string threads, instances, split, source, destination, out, seeds;
};

void cmd_cross_target(const CrossArgs& args) {
  stance::Config config = resolve_config(args.common);
  auto bundle = load_bundle(args.threads, args.instances, args.split);
  if (args.split.empty()) throw stance::ConfigError("cross-target requires --split");

  fs::create_directories(args.common.out_dir);
  Manifest manifest("cross-target", args.common, config);
  manifest.add_input(args.threads);
  manifest.add_input(args.instances);
  manifest.add_input(args.split);

  const auto encoder = stance::encoding::make_encoder(config);
  stance::evaluation::ExperimentPlan plan;
  plan.kind = stance::evaluation::ExperimentKind::CrossTarget;
  plan.source_targets = split_csv_list(args.source);
  plan.destination_targets = split_csv_list(args.destination);
  plan.seeds = resolve_seeds(config, args.seeds);
  for (const auto seed : plan.seeds) manifest.add_seed(seed);

  const auto options = make_run_options(config, *encoder);
  const auto report =
      stance::evaluation::run_cross_target(plan, bundle, *encoder, options);
  const std::string out_path =
      args.out.empty() ? join_out(args.common, "cross_target.csv") : args.out;
  write_text_file(out_path, stance::evaluation::cross_target_report_to_csv(report));
  manifest.add_output(out_path);
  manifest.write();
  stance::evaluation::print_cross_target(std::cout, report);
}

struct DepthArgs {
  CommonFlags common;
  std::string checkpoint, threads, instances, split, portion = "test", out;
};

void cmd_depth_report(const DepthArgs& args) {
  stance::Config config = resolve_config(args.common);
  if (args.checkpoint.empty() || !fs::exists(args.checkpoint)) {
    throw stance::ConfigError("checkpoint not found: " +
                              (args.checkpoint.empty() ? "(no --checkpoint given)"
                                                       : args.checkpoint));
  }
  auto bundle = load_bundle(args.threads, args.instances, args.split);

  fs::create_directories(args.common.out_dir);
  Manifest manifest("depth-report", args.common, config);
  manifest.add_input(args.checkpoint);
  manifest.add_input(args.threads);
  manifest.add_input(args.instances);
  if (!args.split.empty()) manifest.add_input(args.split);

  const auto checkpoint = stance::training::load_checkpoint(args.checkpoint);
  stance::Config checkpoint_config;
  for (const auto& [k, v] : checkpoint.config) checkpoint_config.set(k, v);
  for (const auto& [k, v] : config.values()) checkpoint_config.set(k, v);
  const auto encoder = stance::encoding::make_encoder(checkpoint_config);

  const auto eval_instances =
      args.split.empty() ? bundle.instances : split_portion(bundle, args.portion);
  const auto report = stance::evaluation::run_depth_report(
      checkpoint, eval_instances, bundle.threads, *encoder);
  const std::string out_path =
      args.out.empty() ? join_out(args.common, "depth_report.csv") : args.out;
  write_text_file(out_path, stance::evaluation::report_to_csv(report));
  manifest.add_output(out_path);
  manifest.write();
  stance::evaluation::print_report(std::cout, report);
}

struct AblateArgs {
  CommonFlags common;
  std::string threads, instances, split, variants, out, seeds;
};

void cmd_ablate(const AblateArgs& args) {
  stance::Config config = resolve_config(args.common);
  auto bundle = load_bundle(args.threads, args.instances, args.split);
  if (args.split.empty()) throw stance::ConfigError("ablate requires --split");

  fs::create_directories(args.common.out_dir);
  Manifest manifest("ablate", args.common, config);
  manifest.add_input(args.threads);
  manifest.add_input(args.instances);
  manifest.add_input(args.split);

  const auto encoder = stance::encoding::make_encoder(config);
  stance::evaluation::ExperimentPlan plan;
  plan.kind = stance::evaluation::ExperimentKind::Ablation;
  plan.variants = split_csv_list(
      args.variants.empty()
          ? config.get_string("experiment.variants",
                              "no-global,no-local,no-structural,no-target-attention")
          : args.variants);
  plan.seeds = resolve_seeds(config, args.seeds);
  for (const auto seed : plan.seeds) manifest.add_seed(seed);

  const auto options = make_run_options(config, *encoder);
  const auto report = stance::evaluation::run_ablation(plan, bundle, *encoder, options);
  const std::string out_path =
      args.out.empty() ? join_out(args.common, "ablation.csv") : args.out;
  write_text_file(out_path, stance::evaluation::ablation_report_to_csv(report));
  manifest.add_output(out_path);
  manifest.write();
  stance::evaluation::print_ablation(std::cout, report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conversational stance detection toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand("ingest", "fetch threads from a forum API");
  add_common(ingest, ingest_args.common);
  ingest->add_option("--endpoint", ingest_args.endpoint, "forum API base URL");
  ingest->add_option("--target", ingest_args.target, "target query string");
  ingest->add_option("--pages", ingest_args.pages, "page limit (0 = all pages)");
  ingest->add_option("--token", ingest_args.token, "bearer token");
  ingest->add_option("--rpm", ingest_args.rpm, "request budget per minute");
  ingest->add_option("--max-retries", ingest_args.max_retries,
                     "transient-failure retries per request");
  ingest->add_option("--out", ingest_args.out, "output thread JSONL path");
  ingest->callback([&] { cmd_ingest(ingest_args); });

  PreprocessArgs pre_args;
  CLI::App* pre = app.add_subcommand(
      "preprocess", "filter threads and extract labeled instances");
  add_common(pre, pre_args.common);
  pre->add_option("--threads", pre_args.threads, "input thread JSONL")->required();
  pre->add_option("--votes", pre_args.votes,
                  "relevance votes JSONL {thread_id, votes: [bool, bool]}");
  pre->add_option("--labels", pre_args.labels,
                  "extra labels JSONL {thread_id, utterance_id, label}");
  pre->add_option("--out", pre_args.out, "output instance JSONL path");
  pre->add_option("--rejects", pre_args.rejects, "rejection log CSV path");
  pre->add_option("--split-out", pre_args.split_out,
                  "also write a seeded train/validation/test split here");
  pre->callback([&] { cmd_preprocess(pre_args); });

  StatsArgs stats_args;
  CLI::App* stats = app.add_subcommand("stats", "corpus depth/label statistics");
  add_common(stats, stats_args.common);
  stats->add_option("--instances", stats_args.instances, "instance JSONL")->required();
  stats->add_option("--out", stats_args.out, "output CSV path");
  stats->callback([&] { cmd_stats(stats_args); });

  AgreeArgs agree_args;
  CLI::App* agree = app.add_subcommand("agree", "inter-annotator agreement report");
  add_common(agree, agree_args.common);
  agree->add_option("--annotations", agree_args.annotations, "annotation JSONL")
      ->required();
  agree->add_option("--instances", agree_args.instances,
                    "instance JSONL (provides targets)")
      ->required();
  agree->add_option("--out", agree_args.out, "output CSV path");
  agree->callback([&] { cmd_agree(agree_args); });

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a model on a split");
  add_common(train, train_args.common);
  train->add_option("--threads", train_args.threads, "thread JSONL")->required();
  train->add_option("--instances", train_args.instances, "instance JSONL")->required();
  train->add_option("--split", train_args.split,
                    "split JSON (computed from the seed when omitted)");
  train->add_option("--target", train_args.target, "restrict to one target");
  train->add_option("--checkpoint-out", train_args.checkpoint_out,
                    "checkpoint output path");
  train->add_option("--log", train_args.log_out, "training log JSONL path");
  train->callback([&] { cmd_train(train_args); });

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand(
      "eval", "score a checkpoint, or run the per-target comparison (--in-target)");
  add_common(eval, eval_args.common);
  eval->add_option("--checkpoint", eval_args.checkpoint, "trained checkpoint path");
  eval->add_option("--threads", eval_args.threads, "thread JSONL")->required();
  eval->add_option("--instances", eval_args.instances, "instance JSONL")->required();
  eval->add_option("--split", eval_args.split, "split JSON");
  eval->add_option("--portion", eval_args.portion,
                   "split portion to score (train|validation|test)");
  eval->add_option("--seeds", eval_args.seeds, "comma-separated seed list");
  eval->add_flag("--in-target", eval_args.in_target,
                 "train and compare sentence_only vs with_history per target");
  eval->add_option("--out", eval_args.out, "output CSV path");
  eval->callback([&] { cmd_eval(eval_args); });

  CrossArgs cross_args;
  CLI::App* cross = app.add_subcommand("cross-target",
                                       "train on one target, test on another");
  add_common(cross, cross_args.common);
  cross->add_option("--threads", cross_args.threads, "thread JSONL")->required();
  cross->add_option("--instances", cross_args.instances, "instance JSONL")->required();
  cross->add_option("--split", cross_args.split, "split JSON")->required();
  cross->add_option("--source", cross_args.source, "comma-separated source targets")
      ->required();
  cross->add_option("--destination", cross_args.destination,
                    "comma-separated destination targets")
      ->required();
  cross->add_option("--seeds", cross_args.seeds, "comma-separated seed list");
  cross->add_option("--out", cross_args.out, "output CSV path");
  cross->callback([&] { cmd_cross_target(cross_args); });

  DepthArgs depth_args;
  CLI::App* depth = app.add_subcommand("depth-report",
                                       "score a checkpoint bucketed by depth");
  add_common(depth, depth_args.common);
  depth->add_option("--checkpoint", depth_args.checkpoint, "trained checkpoint path");
  depth->add_option("--threads", depth_args.threads, "thread JSONL")->required();
  depth->add_option("--instances", depth_args.instances, "instance JSONL")->required();
  depth->add_option("--split", depth_args.split, "split JSON");
  depth->add_option("--portion", depth_args.portion,
                    "split portion to score (train|validation|test)");
  depth->add_option("--out", depth_args.out, "output CSV path");
  depth->callback([&] { cmd_depth_report(depth_args); });

  AblateArgs ablate_args;
  CLI::App* ablate = app.add_subcommand("ablate", "branch ablation comparison");
  add_common(ablate, ablate_args.common);
  ablate->add_option("--threads", ablate_args.threads, "thread JSONL")->required();
  ablate->add_option("--instances", ablate_args.instances, "instance JSONL")
      ->required();
  ablate->add_option("--split", ablate_args.split, "split JSON")->required();
  ablate->add_option("--variants", ablate_args.variants,
                     "comma-separated variants (no-global, no-local, no-structural, "
                     "no-target-attention, full)");
  ablate->add_option("--seeds", ablate_args.seeds, "comma-separated seed list");
  ablate->add_option("--out", ablate_args.out, "output CSV path");
  ablate->callback([&] { cmd_ablate(ablate_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const stance::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const stance::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
