#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/errors.hpp"
#include "support/synthetic.hpp"

using namespace stance;
using namespace stance::corpus;

namespace {

Utterance make_utt(std::string id, std::string text,
                   std::optional<std::string> parent,
                   std::optional<Stance> label = std::nullopt) {
  Utterance u;
  u.id = std::move(id);
  u.author = "user-" + u.id;
  u.text = std::move(text);
  u.parent_id = std::move(parent);
  u.label = label;
  return u;
}

ConversationThread chain_thread(const std::string& id, int depth,
                                const std::string& target = "guns") {
  std::vector<Utterance> utts;
  for (int i = 0; i < depth; ++i) {
    utts.push_back(make_utt(
        "u" + std::to_string(i), "node " + std::to_string(i),
        i == 0 ? std::nullopt : std::optional<std::string>("u" + std::to_string(i - 1))));
  }
  return ConversationThread(id, target, std::move(utts));
}

}  // namespace

TEST_CASE("thread validation annotates depth and word counts") {
  std::vector<Utterance> utts;
  utts.push_back(make_utt("root", "the original post text", std::nullopt));
  utts.push_back(make_utt("a", "first reply", "root"));
  utts.push_back(make_utt("b", "reply to the reply", "a"));
  utts.push_back(make_utt("c", "sibling", "root"));
  ConversationThread t("t1", "guns", std::move(utts));

  CHECK(t.thread_id() == "t1");
  CHECK(t.target() == "guns");
  CHECK(t.comment_count() == 3);
  CHECK(t.root().id == "root");
  CHECK(t.root().depth == 1);
  CHECK(t.root().word_count == 4);
  CHECK(t.utterance("b").depth == 3);
  CHECK(t.utterance("c").depth == 2);
  CHECK(t.contains("a"));
  CHECK(!t.contains("zzz"));
  CHECK(t.ancestor_path("b") == std::vector<std::string>{"root", "a", "b"});
  CHECK(t.ancestor_path("root") == std::vector<std::string>{"root"});
  CHECK_THROWS_AS(t.utterance("zzz"), IntegrityError);
  CHECK_THROWS_AS(t.ancestor_path("zzz"), IntegrityError);
}

TEST_CASE("thread validation rejects malformed reply graphs") {
  CHECK_THROWS_AS(ConversationThread("t", "x", {}), IntegrityError);

  std::vector<Utterance> dup;
  dup.push_back(make_utt("r", "root", std::nullopt));
  dup.push_back(make_utt("r", "twin", "r"));
  CHECK_THROWS_AS(ConversationThread("t", "x", std::move(dup)), IntegrityError);

  std::vector<Utterance> dangling;
  dangling.push_back(make_utt("r", "root", std::nullopt));
  dangling.push_back(make_utt("a", "orphan", "ghost"));
  CHECK_THROWS_AS(ConversationThread("t", "x", std::move(dangling)), IntegrityError);

  std::vector<Utterance> rootless;
  rootless.push_back(make_utt("a", "x", "b"));
  rootless.push_back(make_utt("b", "y", "a"));
  CHECK_THROWS_AS(ConversationThread("t", "x", std::move(rootless)), IntegrityError);

  std::vector<Utterance> two_roots;
  two_roots.push_back(make_utt("r1", "x", std::nullopt));
  two_roots.push_back(make_utt("r2", "y", std::nullopt));
  CHECK_THROWS_AS(ConversationThread("t", "x", std::move(two_roots)), IntegrityError);

  std::vector<Utterance> cyclic;
  cyclic.push_back(make_utt("r", "root", std::nullopt));
  cyclic.push_back(make_utt("a", "x", "b"));
  cyclic.push_back(make_utt("b", "y", "a"));
  CHECK_THROWS_AS(ConversationThread("t", "x", std::move(cyclic)), IntegrityError);
}

TEST_CASE("thread json round trip preserves structure and labels") {
  std::vector<Utterance> utts;
  utts.push_back(make_utt("root", "post", std::nullopt));
  utts.push_back(make_utt("a", "reply", "root", Stance::Favor));
  ConversationThread t("t9", "tax", std::move(utts));

  std::string line = thread_to_json(t);
  ConversationThread back = parse_thread(line);
  CHECK(back.thread_id() == "t9");
  CHECK(back.target() == "tax");
  CHECK(back.utterances().size() == 2);
  CHECK(!back.root().label.has_value());
  CHECK(back.utterance("a").label == Stance::Favor);
  CHECK(back.utterance("a").parent_id == std::optional<std::string>("root"));

  CHECK_THROWS_AS(parse_thread("not json"), ParseError);
  CHECK_THROWS_AS(parse_thread("{\"thread_id\": \"t\"}"), ParseError);
}

TEST_CASE("threads and instances survive jsonl files") {
  testing::TempDir dir("corpusio");
  std::vector<ConversationThread> threads{chain_thread("t1", 3),
                                          chain_thread("t2", 2, "tax")};
  save_threads_jsonl(dir.file("threads.jsonl"), threads);
  auto loaded = load_threads_jsonl(dir.file("threads.jsonl"));
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].thread_id() == "t1");
  CHECK(loaded[1].target() == "tax");
  CHECK(loaded[0].utterance("u2").depth == 3);

  std::vector<StanceInstance> instances =
      extract_instances(threads[0], {{"u2", Stance::Against}});
  save_instances_jsonl(dir.file("instances.jsonl"), instances);
  auto inst_back = load_instances_jsonl(dir.file("instances.jsonl"));
  REQUIRE(inst_back.size() == 1);
  CHECK(inst_back[0].instance_id == "t1/u2");
  CHECK(inst_back[0].path == std::vector<std::string>{"u0", "u1", "u2"});
  CHECK(inst_back[0].label == Stance::Against);
  CHECK(inst_back[0].depth == 3);

  CHECK_THROWS_AS(load_threads_jsonl(dir.file("absent.jsonl")), ConfigError);
  testing::write_file(dir.file("bad.jsonl"), "{broken\n");
  CHECK_THROWS_AS(load_threads_jsonl(dir.file("bad.jsonl")), ParseError);
}

TEST_CASE("split json round trip") {
  testing::TempDir dir("splitio");
  CorpusSplit split;
  split.seed = 11;
  split.train = {"a", "b"};
  split.validation = {"c"};
  split.test = {"d"};
  save_split_json(dir.file("split.json"), split);
  CorpusSplit back = load_split_json(dir.file("split.json"));
  CHECK(back.seed == 11);
  CHECK(back.train == split.train);
  CHECK(back.validation == split.validation);
  CHECK(back.test == split.test);
}

TEST_CASE("filter_post applies rules in order with first failing reason") {
  auto make = [](int root_words, int comments) {
    std::vector<Utterance> utts;
    std::string text;
    for (int i = 0; i < root_words; ++i) text += "w" + std::to_string(i) + " ";
    utts.push_back(make_utt("r", text, std::nullopt));
    for (int i = 0; i < comments; ++i) {
      utts.push_back(make_utt("c" + std::to_string(i), "reply text", "r"));
    }
    return ConversationThread("t", "guns", std::move(utts));
  };

  FilterRules rules;  // defaults: >= 200 comments, 15..150 root words
  CHECK(filter_post(make(15, 200), {true, true}, rules).accepted);
  CHECK(filter_post(make(150, 200), {true, true}, rules).accepted);

  FilterDecision rel = filter_post(make(15, 200), {true, false}, rules);
  CHECK(!rel.accepted);
  CHECK(rel.reason == "relevance");
  CHECK(filter_post(make(15, 200), {false, false}, rules).reason == "relevance");

  CHECK(filter_post(make(15, 199), {true, true}, rules).reason == "comment_count");
  CHECK(filter_post(make(14, 200), {true, true}, rules).reason == "word_count");
  CHECK(filter_post(make(151, 200), {true, true}, rules).reason == "word_count");

  FilterRules lang = rules;
  lang.language_check = [](const std::string&) { return false; };
  CHECK(filter_post(make(15, 200), {true, true}, lang).reason == "language");

  // Default check: ASCII-dominant text passes, mostly high-byte text fails.
  std::vector<Utterance> utts;
  std::string cyrillic;
  for (int i = 0; i < 20; ++i) cyrillic += "\xd0\xb0\xd0\xb1 ";
  utts.push_back(make_utt("r", cyrillic, std::nullopt));
  for (int i = 0; i < 200; ++i) {
    utts.push_back(make_utt("c" + std::to_string(i), "reply", "r"));
  }
  ConversationThread foreign("t", "guns", std::move(utts));
  CHECK(filter_post(foreign, {true, true}, rules).reason == "language");
  FilterRules off = rules;
  off.check_language = false;
  CHECK(filter_post(foreign, {true, true}, off).accepted);
}

TEST_CASE("extract_instances follows document order and ancestor chains") {
  std::vector<Utterance> utts;
  utts.push_back(make_utt("r", "root", std::nullopt));
  utts.push_back(make_utt("a", "x", "r"));
  utts.push_back(make_utt("b", "y", "a"));
  utts.push_back(make_utt("c", "z", "r"));
  ConversationThread t("th", "guns", std::move(utts));

  auto instances = extract_instances(
      t, {{"c", Stance::None}, {"b", Stance::Favor}, {"r", Stance::Against}});
  REQUIRE(instances.size() == 3);
  CHECK(instances[0].instance_id == "th/r");
  CHECK(instances[0].path == std::vector<std::string>{"r"});
  CHECK(instances[0].depth == 1);
  CHECK(instances[1].instance_id == "th/b");
  CHECK(instances[1].path == std::vector<std::string>{"r", "a", "b"});
  CHECK(instances[2].instance_id == "th/c");
  CHECK(instances[2].target == "guns");

  CHECK_THROWS_AS(extract_instances(t, {{"ghost", Stance::None}}), IntegrityError);
}

TEST_CASE("split_corpus stratifies per target with rounded portions") {
  std::vector<StanceInstance> instances;
  auto add = [&](const std::string& target, int n) {
    for (int i = 0; i < n; ++i) {
      StanceInstance inst;
      inst.instance_id = target + "/" + std::to_string(i);
      inst.thread_id = target;
      inst.path = {"r"};
      inst.target = target;
      inst.depth = 1;
      instances.push_back(inst);
    }
  };
  add("guns", 20);
  add("tax", 10);

  CorpusSplit split = split_corpus(instances, 3);
  CHECK(split.seed == 3);
  CHECK(split.train.size() + split.validation.size() + split.test.size() == 30);

  auto count_target = [](const std::vector<std::string>& ids, const std::string& t) {
    long n = 0;
    for (const auto& id : ids) n += id.rfind(t + "/", 0) == 0;
    return n;
  };
  // guns: 20 -> test 4, val round(0.15*16) = 2, train 14.
  CHECK(count_target(split.test, "guns") == 4);
  CHECK(count_target(split.validation, "guns") == 2);
  CHECK(count_target(split.train, "guns") == 14);
  // tax: 10 -> test 2, val round(0.15*8) = 1, train 7.
  CHECK(count_target(split.test, "tax") == 2);
  CHECK(count_target(split.validation, "tax") == 1);
  CHECK(count_target(split.train, "tax") == 7);

  // No overlap, portions sorted, pure function of (instances, seed).
  std::set<std::string> all(split.train.begin(), split.train.end());
  all.insert(split.validation.begin(), split.validation.end());
  all.insert(split.test.begin(), split.test.end());
  CHECK(all.size() == 30);
  CHECK(std::is_sorted(split.train.begin(), split.train.end()));
  CHECK(std::is_sorted(split.test.begin(), split.test.end()));

  std::vector<StanceInstance> reversed(instances.rbegin(), instances.rend());
  CorpusSplit again = split_corpus(reversed, 3);
  CHECK(again.train == split.train);
  CHECK(again.validation == split.validation);
  CHECK(again.test == split.test);
  CorpusSplit other = split_corpus(instances, 4);
  CHECK(other.train != split.train);

  std::vector<StanceInstance> tiny(instances.begin(), instances.begin() + 2);
  CHECK_THROWS_AS(split_corpus(tiny, 1), ConfigError);
}

TEST_CASE("depth buckets partition depths") {
  CHECK(depth_bucket_index(1) == 0);
  CHECK(depth_bucket_index(2) == 0);
  CHECK(depth_bucket_index(3) == 1);
  CHECK(depth_bucket_index(5) == 1);
  CHECK(depth_bucket_index(6) == 2);
  CHECK(depth_bucket_index(8) == 2);
  CHECK(depth_bucket_index(9) == 3);
  CHECK(depth_bucket_index(40) == 3);
  CHECK(depth_bucket_name(4) == "3-5");
  CHECK(depth_bucket_name(12) == ">=9");
}

namespace {

// Hand-counted stats fixture: 10 instances across two targets.
// guns: against depth1 x2, favor depth3 x1, none depth9 x1.
// tax: against depth2 x1, against depth12 x1, favor depth3 x1,
//      favor depth6 x2, none depth1 x1.
std::vector<StanceInstance> stats_fixture() {
  std::vector<StanceInstance> v;
  auto add = [&](const std::string& target, Stance label, int depth) {
    StanceInstance inst;
    inst.instance_id = target + "/" + std::to_string(v.size());
    inst.thread_id = target;
    inst.target = target;
    inst.label = label;
    inst.depth = depth;
    inst.path.assign(depth, "u");
    v.push_back(inst);
  };
  add("guns", Stance::Against, 1);
  add("guns", Stance::Against, 1);
  add("guns", Stance::Favor, 3);
  add("guns", Stance::None, 9);
  add("tax", Stance::Against, 2);
  add("tax", Stance::Against, 12);
  add("tax", Stance::Favor, 3);
  add("tax", Stance::Favor, 6);
  add("tax", Stance::Favor, 6);
  add("tax", Stance::None, 1);
  return v;
}

}  // namespace

TEST_CASE("corpus_stats counts every marginal exactly") {
  CorpusStats stats = corpus_stats(stats_fixture());
  CHECK(stats.total == 10);
  CHECK(stats.by_target.at("guns") == 4);
  CHECK(stats.by_target.at("tax") == 6);
  CHECK(stats.by_label.at(Stance::Against) == 4);
  CHECK(stats.by_label.at(Stance::Favor) == 4);
  CHECK(stats.by_label.at(Stance::None) == 2);
  CHECK(stats.by_depth.at(1) == 3);
  CHECK(stats.by_depth.at(2) == 1);
  CHECK(stats.by_depth.at(3) == 2);
  CHECK(stats.by_depth.at(6) == 2);
  CHECK(stats.by_depth.at(9) == 1);
  CHECK(stats.by_depth.at(12) == 1);
  CHECK(stats.by_bucket.at("1-2") == 4);
  CHECK(stats.by_bucket.at("3-5") == 2);
  CHECK(stats.by_bucket.at("6-8") == 2);
  CHECK(stats.by_bucket.at(">=9") == 2);
  CHECK(stats.detail.at({"guns", Stance::Against, 1}) == 2);
  CHECK(stats.detail.at({"tax", Stance::Favor, 6}) == 2);
}

TEST_CASE("stats_to_csv reports hand-computed percentages") {
  std::string csv = stats_to_csv(corpus_stats(stats_fixture()));
  CHECK(csv.rfind("target,label,depth,count,percent\n", 0) == 0);
  // Detail rows carry the share of their target.
  CHECK(csv.find("guns,against,1,2,50.00\n") != std::string::npos);
  CHECK(csv.find("guns,favor,3,1,25.00\n") != std::string::npos);
  CHECK(csv.find("guns,none,9,1,25.00\n") != std::string::npos);
  CHECK(csv.find("tax,against,2,1,16.67\n") != std::string::npos);
  CHECK(csv.find("tax,favor,6,2,33.33\n") != std::string::npos);
  // "all" rows carry the share of the whole corpus.
  CHECK(csv.find("all,all,1,3,30.00\n") != std::string::npos);
  CHECK(csv.find("all,all,12,1,10.00\n") != std::string::npos);
  CHECK(csv.find("all,all,1-2,4,40.00\n") != std::string::npos);
  CHECK(csv.find("all,all,3-5,2,20.00\n") != std::string::npos);
  CHECK(csv.find("all,all,6-8,2,20.00\n") != std::string::npos);
  CHECK(csv.find("all,all,>=9,2,20.00\n") != std::string::npos);
}

TEST_CASE("stats_to_csv emits all four buckets even when empty") {
  std::vector<StanceInstance> one;
  StanceInstance inst;
  inst.instance_id = "t/0";
  inst.thread_id = "t";
  inst.target = "t";
  inst.label = Stance::Favor;
  inst.depth = 1;
  inst.path = {"u"};
  one.push_back(inst);
  std::string csv = stats_to_csv(corpus_stats(one));
  CHECK(csv.find("all,all,1-2,1,100.00\n") != std::string::npos);
  CHECK(csv.find("all,all,3-5,0,0.00\n") != std::string::npos);
  CHECK(csv.find("all,all,6-8,0,0.00\n") != std::string::npos);
  CHECK(csv.find("all,all,>=9,0,0.00\n") != std::string::npos);
}
