#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stance/label.hpp"

namespace stance::corpus {

// One post or comment inside a reply tree. The root post has no parent and
// depth 1; every reply sits one level below its parent.
struct Utterance {
  std::string id;
  std::string author;
  std::string text;
  std::optional<std::string> parent_id;  // absent iff root
  int word_count = 0;                    // whitespace-token count of text
  int depth = 0;                         // root = 1
  std::optional<Stance> label;           // present when the source carried one
};

// A validated reply tree: exactly one root, all parent ids resolve, no
// cycles, every node reachable from the root.
class ConversationThread {
 public:
  ConversationThread() = default;
  ConversationThread(std::string thread_id, std::string target,
                     std::vector<Utterance> utterances);

  const std::string& thread_id() const { return thread_id_; }
  const std::string& target() const { return target_; }
  const std::vector<Utterance>& utterances() const { return utterances_; }

  bool contains(const std::string& id) const;
  const Utterance& utterance(const std::string& id) const;
  const Utterance& root() const;

  // Replies only; the root post is not a comment.
  int comment_count() const { return static_cast<int>(utterances_.size()) - 1; }

  // Ancestor chain root..id, inclusive.
  std::vector<std::string> ancestor_path(const std::string& id) const;

 private:
  std::string thread_id_;
  std::string target_;
  std::vector<Utterance> utterances_;  // document order
  std::map<std::string, std::size_t> index_;
  std::size_t root_index_ = 0;

  void validate_and_annotate();
};

// A labeled comment plus its conversation context: the ancestor chain from
// the root post down to the comment.
struct StanceInstance {
  std::string instance_id;
  std::string thread_id;
  std::vector<std::string> path;  // root first, labeled utterance last
  std::string target;
  Stance label = Stance::None;
  int depth = 0;  // == path.size(); root-only instance has depth 1
};

struct CorpusSplit {
  std::uint64_t seed = 0;
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// --- JSONL interchange -----------------------------------------------------
// Thread line: {"thread_id", "target", "utterances": [{"id", "author",
// "text", "parent_id" (null for root), "label" (optional)}]}
// Instance line: {"instance_id", "thread_id", "path", "target", "label"}

ConversationThread parse_thread(const std::string& jsonl_line);
std::string thread_to_json(const ConversationThread& thread);

std::vector<ConversationThread> load_threads_jsonl(const std::string& path);
void save_threads_jsonl(const std::string& path,
                        const std::vector<ConversationThread>& threads);

std::vector<StanceInstance> load_instances_jsonl(const std::string& path);
void save_instances_jsonl(const std::string& path,
                          const std::vector<StanceInstance>& instances);

CorpusSplit load_split_json(const std::string& path);
void save_split_json(const std::string& path, const CorpusSplit& split);

// --- Preprocessing ----------------------------------------------------------

// Post acceptance rules. The language check is a predicate over the root
// text; the default accepts ASCII-dominant text (>= ascii_letter_fraction of
// letter-like bytes are ASCII letters).
struct FilterRules {
  int min_comments = 200;
  int min_root_words = 15;
  int max_root_words = 150;
  bool check_language = true;
  double min_ascii_letter_fraction = 0.9;
  std::function<bool(const std::string&)> language_check;  // overrides default
};

struct FilterDecision {
  bool accepted = false;
  std::string reason;  // first failing rule: relevance | comment_count |
                       // word_count | language; empty when accepted
};

FilterDecision filter_post(const ConversationThread& thread,
                           std::pair<bool, bool> relevance_votes,
                           const FilterRules& rules = {});

// One instance per labeled utterance; the context is the unique
// root-to-utterance ancestor chain. Output follows the thread's document
// order of the labeled utterances. instance_id = thread_id "/" utterance_id.
std::vector<StanceInstance> extract_instances(
    const ConversationThread& thread, const std::map<std::string, Stance>& labels);

// Stratified per target: test = round(0.2 N), then validation =
// round(0.15 (N - test)) of the remainder, rest train. Pure function of
// (instances, seed); input order does not matter.
CorpusSplit split_corpus(const std::vector<StanceInstance>& instances,
                         std::uint64_t seed);

// --- Statistics --------------------------------------------------------------

inline constexpr const char* kDepthBucketNames[] = {"1-2", "3-5", "6-8", ">=9"};

// Bucket index for a depth: 0 for 1-2, 1 for 3-5, 2 for 6-8, 3 for >= 9.
int depth_bucket_index(int depth);
std::string depth_bucket_name(int depth);

struct CorpusStats {
  long total = 0;
  // (target, label, depth) -> count
  std::map<std::tuple<std::string, Stance, int>, long> detail;
  std::map<int, long> by_depth;
  std::map<std::string, long> by_bucket;
  std::map<std::string, long> by_target;
  std::map<Stance, long> by_label;
};

CorpusStats corpus_stats(const std::vector<StanceInstance>& instances);

// CSV with columns target,label,depth,count,percent. Detail rows carry the
// share of their target; "all" rows carry the share of the whole corpus.
std::string stats_to_csv(const CorpusStats& stats);

}  // namespace stance::corpus
