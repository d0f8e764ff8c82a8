#include "stance/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "stance/errors.hpp"
#include "stance/rng.hpp"
#include "stance/text.hpp"
#include "csv_util.hpp"

namespace stance::corpus {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// ConversationThread
// ---------------------------------------------------------------------------

ConversationThread::ConversationThread(std::string thread_id, std::string target,
                                       std::vector<Utterance> utterances)
    : thread_id_(std::move(thread_id)),
      target_(std::move(target)),
      utterances_(std::move(utterances)) {
  validate_and_annotate();
}

void ConversationThread::validate_and_annotate() {
  if (utterances_.empty()) {
    throw IntegrityError("thread '" + thread_id_ + "' has no utterances");
  }
  index_.clear();
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    auto [it, inserted] = index_.emplace(utterances_[i].id, i);
    (void)it;
    if (!inserted) {
      throw IntegrityError("thread '" + thread_id_ + "': duplicate utterance id '" +
                           utterances_[i].id + "'");
    }
  }

  int roots = 0;
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    if (!utterances_[i].parent_id) {
      ++roots;
      root_index_ = i;
    } else if (!index_.count(*utterances_[i].parent_id)) {
      throw IntegrityError("thread '" + thread_id_ + "': utterance '" +
                           utterances_[i].id + "' references missing parent '" +
                           *utterances_[i].parent_id + "'");
    }
  }
  if (roots == 0) {
    throw IntegrityError("thread '" + thread_id_ + "' has no root utterance");
  }
  if (roots > 1) {
    throw IntegrityError("thread '" + thread_id_ + "' has " + std::to_string(roots) +
                         " roots; expected exactly one");
  }

  // Depths by walking parent chains; a revisit inside one walk is a cycle.
  // With a single root, resolved parents, and acyclic chains, every node is
  // reachable from the root.
  for (auto& u : utterances_) {
    u.word_count = count_words(u.text);
    u.depth = 0;
  }
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    if (utterances_[i].depth != 0) continue;
    std::vector<std::size_t> chain;
    std::set<std::size_t> on_chain;
    std::size_t cur = i;
    while (utterances_[cur].depth == 0) {
      if (!on_chain.insert(cur).second) {
        throw IntegrityError("thread '" + thread_id_ + "': reply cycle through '" +
                             utterances_[cur].id + "'");
      }
      chain.push_back(cur);
      if (!utterances_[cur].parent_id) {
        utterances_[cur].depth = 1;
        chain.pop_back();
        break;
      }
      cur = index_.at(*utterances_[cur].parent_id);
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      const Utterance& parent = utterances_[index_.at(*utterances_[*it].parent_id)];
      utterances_[*it].depth = parent.depth + 1;
    }
  }
}

bool ConversationThread::contains(const std::string& id) const {
  return index_.count(id) > 0;
}

const Utterance& ConversationThread::utterance(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw IntegrityError("thread '" + thread_id_ + "': unknown utterance id '" + id +
                         "'");
  }
  return utterances_[it->second];
}

const Utterance& ConversationThread::root() const { return utterances_[root_index_]; }

std::vector<std::string> ConversationThread::ancestor_path(const std::string& id) const {
  std::vector<std::string> path;
  const Utterance* cur = &utterance(id);
  path.push_back(cur->id);
  while (cur->parent_id) {
    cur = &utterance(*cur->parent_id);
    path.push_back(cur->id);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// ---------------------------------------------------------------------------
// JSONL interchange
// ---------------------------------------------------------------------------

namespace {

const json& require_field(const json& obj, const char* name, const std::string& where) {
  auto it = obj.find(name);
  if (it == obj.end()) {
    throw ParseError(where + ": missing field '" + name + "'");
  }
  return *it;
}

std::string require_string_field(const json& obj, const char* name,
                                 const std::string& where) {
  const json& v = require_field(obj, name, where);
  if (!v.is_string()) {
    throw ParseError(where + ": field '" + name + "' must be a string");
  }
  return v.get<std::string>();
}

json parse_json_line(const std::string& line, const std::string& where) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ParseError(where + ": not a JSON object");
  }
  return doc;
}

}  // namespace

ConversationThread parse_thread(const std::string& jsonl_line) {
  json doc = parse_json_line(jsonl_line, "thread record");
  std::string thread_id = require_string_field(doc, "thread_id", "thread record");
  std::string where = "thread '" + thread_id + "'";
  std::string target = require_string_field(doc, "target", where);

  const json& utts = require_field(doc, "utterances", where);
  if (!utts.is_array()) {
    throw ParseError(where + ": field 'utterances' must be an array");
  }

  std::vector<Utterance> utterances;
  utterances.reserve(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const json& u = utts[i];
    std::string uwhere = where + ", utterances[" + std::to_string(i) + "]";
    if (!u.is_object()) throw ParseError(uwhere + ": not a JSON object");
    Utterance out;
    out.id = require_string_field(u, "id", uwhere);
    out.author = require_string_field(u, "author", uwhere);
    out.text = require_string_field(u, "text", uwhere);
    const json& parent = require_field(u, "parent_id", uwhere);
    if (parent.is_null()) {
      out.parent_id.reset();
    } else if (parent.is_string()) {
      out.parent_id = parent.get<std::string>();
    } else {
      throw ParseError(uwhere + ": field 'parent_id' must be a string or null");
    }
    if (u.contains("label") && !u["label"].is_null()) {
      if (!u["label"].is_string()) {
        throw ParseError(uwhere + ": field 'label' must be a string");
      }
      out.label = stance_from_string(u["label"].get<std::string>());
    }
    utterances.push_back(std::move(out));
  }
  return ConversationThread(std::move(thread_id), std::move(target),
                            std::move(utterances));
}

std::string thread_to_json(const ConversationThread& thread) {
  ordered_json doc;
  doc["thread_id"] = thread.thread_id();
  doc["target"] = thread.target();
  doc["utterances"] = ordered_json::array();
  for (const auto& u : thread.utterances()) {
    ordered_json ju;
    ju["id"] = u.id;
    ju["author"] = u.author;
    ju["text"] = u.text;
    if (u.parent_id) {
      ju["parent_id"] = *u.parent_id;
    } else {
      ju["parent_id"] = nullptr;
    }
    if (u.label) ju["label"] = to_string(*u.label);
    doc["utterances"].push_back(std::move(ju));
  }
  return doc.dump();
}

std::vector<ConversationThread> load_threads_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open threads file: " + path);
  std::vector<ConversationThread> threads;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      threads.push_back(parse_thread(line));
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return threads;
}

void save_threads_jsonl(const std::string& path,
                        const std::vector<ConversationThread>& threads) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write threads file: " + path);
  for (const auto& t : threads) out << thread_to_json(t) << "\n";
}

std::vector<StanceInstance> load_instances_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open instances file: " + path);
  std::vector<StanceInstance> instances;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string where = path + ":" + std::to_string(lineno);
    try {
      json doc = parse_json_line(line, "instance record");
      StanceInstance inst;
      inst.instance_id = require_string_field(doc, "instance_id", "instance record");
      inst.thread_id = require_string_field(doc, "thread_id", "instance record");
      inst.target = require_string_field(doc, "target", "instance record");
      inst.label =
          stance_from_string(require_string_field(doc, "label", "instance record"));
      const json& path_field = require_field(doc, "path", "instance record");
      if (!path_field.is_array() || path_field.empty()) {
        throw ParseError("instance record: field 'path' must be a nonempty array");
      }
      for (const auto& p : path_field) {
        if (!p.is_string()) {
          throw ParseError("instance record: 'path' entries must be strings");
        }
        inst.path.push_back(p.get<std::string>());
      }
      inst.depth = static_cast<int>(inst.path.size());
      instances.push_back(std::move(inst));
    } catch (const Error& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return instances;
}

void save_instances_jsonl(const std::string& path,
                          const std::vector<StanceInstance>& instances) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write instances file: " + path);
  for (const auto& inst : instances) {
    ordered_json doc;
    doc["instance_id"] = inst.instance_id;
    doc["thread_id"] = inst.thread_id;
    doc["path"] = inst.path;
    doc["target"] = inst.target;
    doc["label"] = to_string(inst.label);
    out << doc.dump() << "\n";
  }
}

CorpusSplit load_split_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open split file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("split file " + path + ": " + e.what());
  }
  CorpusSplit split;
  split.seed = require_field(doc, "seed", "split file").get<std::uint64_t>();
  for (const char* part : {"train", "validation", "test"}) {
    const json& arr = require_field(doc, part, "split file");
    if (!arr.is_array()) {
      throw ParseError(std::string("split file: field '") + part +
                       "' must be an array");
    }
    auto& dst = part == std::string("train")        ? split.train
                : part == std::string("validation") ? split.validation
                                                    : split.test;
    for (const auto& id : arr) dst.push_back(id.get<std::string>());
  }
  return split;
}

void save_split_json(const std::string& path, const CorpusSplit& split) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write split file: " + path);
  ordered_json doc;
  doc["seed"] = split.seed;
  doc["train"] = split.train;
  doc["validation"] = split.validation;
  doc["test"] = split.test;
  out << doc.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Preprocessing
// ---------------------------------------------------------------------------

FilterDecision filter_post(const ConversationThread& thread,
                           std::pair<bool, bool> relevance_votes,
                           const FilterRules& rules) {
  if (!(relevance_votes.first && relevance_votes.second)) {
    return {false, "relevance"};
  }
  if (thread.comment_count() < rules.min_comments) {
    return {false, "comment_count"};
  }
  int words = thread.root().word_count;
  if (words < rules.min_root_words || words > rules.max_root_words) {
    return {false, "word_count"};
  }
  if (rules.language_check) {
    if (!rules.language_check(thread.root().text)) return {false, "language"};
  } else if (rules.check_language) {
    if (ascii_letter_fraction(thread.root().text) < rules.min_ascii_letter_fraction) {
      return {false, "language"};
    }
  }
  return {true, ""};
}

std::vector<StanceInstance> extract_instances(
    const ConversationThread& thread, const std::map<std::string, Stance>& labels) {
  for (const auto& [id, label] : labels) {
    (void)label;
    if (!thread.contains(id)) {
      throw IntegrityError("thread '" + thread.thread_id() + "': label on unknown id '" +
                           id + "'");
    }
  }
  std::vector<StanceInstance> instances;
  for (const auto& u : thread.utterances()) {
    auto it = labels.find(u.id);
    if (it == labels.end()) continue;
    StanceInstance inst;
    inst.instance_id = thread.thread_id() + "/" + u.id;
    inst.thread_id = thread.thread_id();
    inst.path = thread.ancestor_path(u.id);
    inst.target = thread.target();
    inst.label = it->second;
    inst.depth = static_cast<int>(inst.path.size());
    instances.push_back(std::move(inst));
  }
  return instances;
}

CorpusSplit split_corpus(const std::vector<StanceInstance>& instances,
                         std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_target;
  for (const auto& inst : instances) {
    by_target[inst.target].push_back(inst.instance_id);
  }
  CorpusSplit split;
  split.seed = seed;
  for (auto& [target, ids] : by_target) {
    if (ids.size() < 3) {
      throw ConfigError("target '" + target + "' has only " +
                        std::to_string(ids.size()) + " instances; need at least 3");
    }
    // Canonical order before shuffling makes the split independent of the
    // caller's instance order.
    std::sort(ids.begin(), ids.end());
    Rng rng(Rng::derive(seed, target));
    rng.shuffle(ids);

    long n = static_cast<long>(ids.size());
    long n_test = std::lround(0.2 * static_cast<double>(n));
    long n_val = std::lround(0.15 * static_cast<double>(n - n_test));
    split.test.insert(split.test.end(), ids.begin(), ids.begin() + n_test);
    split.validation.insert(split.validation.end(), ids.begin() + n_test,
                            ids.begin() + n_test + n_val);
    split.train.insert(split.train.end(), ids.begin() + n_test + n_val, ids.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

int depth_bucket_index(int depth) {
  if (depth <= 2) return 0;
  if (depth <= 5) return 1;
  if (depth <= 8) return 2;
  return 3;
}

std::string depth_bucket_name(int depth) {
  return kDepthBucketNames[depth_bucket_index(depth)];
}

CorpusStats corpus_stats(const std::vector<StanceInstance>& instances) {
  CorpusStats stats;
  stats.total = static_cast<long>(instances.size());
  for (const auto& inst : instances) {
    stats.detail[{inst.target, inst.label, inst.depth}] += 1;
    stats.by_depth[inst.depth] += 1;
    stats.by_bucket[depth_bucket_name(inst.depth)] += 1;
    stats.by_target[inst.target] += 1;
    stats.by_label[inst.label] += 1;
  }
  return stats;
}

std::string stats_to_csv(const CorpusStats& stats) {
  using detail::csv_escape;
  using detail::format_fixed;
  std::string out = "target,label,depth,count,percent\n";
  auto pct = [](long count, long total) {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
  };
  for (const auto& [key, count] : stats.detail) {
    const auto& [target, label, depth] = key;
    long target_total = stats.by_target.at(target);
    out += csv_escape(target) + "," + to_string(label) + "," + std::to_string(depth) +
           "," + std::to_string(count) + "," +
           format_fixed(pct(count, target_total), 2) + "\n";
  }
  for (const auto& [depth, count] : stats.by_depth) {
    out += "all,all," + std::to_string(depth) + "," + std::to_string(count) + "," +
           format_fixed(pct(count, stats.total), 2) + "\n";
  }
  for (const char* bucket : kDepthBucketNames) {
    auto it = stats.by_bucket.find(bucket);
    long count = it == stats.by_bucket.end() ? 0 : it->second;
    out += std::string("all,all,") + bucket + "," + std::to_string(count) + "," +
           format_fixed(pct(count, stats.total), 2) + "\n";
  }
  return out;
}

}  // namespace stance::corpus
