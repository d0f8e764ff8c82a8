#include "support/synthetic.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stance/rng.hpp"

namespace stance::testing {

namespace {

const std::vector<std::string> kNeutralWords = {
    "the",  "point", "holds", "here",  "reply", "notes",
    "my",   "view",  "on",    "this",  "topic", "today"};

const std::string kCueWords[3] = {"opposecue", "supportcue", "asidecue"};

std::string neutral_sentence(Rng& rng, int min_words, int extra) {
  const int n = min_words + static_cast<int>(rng.below(extra + 1));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += kNeutralWords[rng.below(kNeutralWords.size())];
  }
  return out;
}

corpus::Utterance make_utterance(std::string id, std::string text,
                                 std::optional<std::string> parent) {
  corpus::Utterance u;
  u.id = std::move(id);
  u.author = "writer";
  u.text = std::move(text);
  u.parent_id = std::move(parent);
  return u;
}

corpus::StanceInstance leaf_instance(const corpus::ConversationThread& thread,
                                     const std::string& leaf_id, Stance label) {
  corpus::StanceInstance inst;
  inst.instance_id = thread.thread_id() + "/" + leaf_id;
  inst.thread_id = thread.thread_id();
  inst.path = thread.ancestor_path(leaf_id);
  inst.target = thread.target();
  inst.label = label;
  inst.depth = static_cast<int>(inst.path.size());
  return inst;
}

}  // namespace

SyntheticCorpus overfit_corpus(int n, std::uint64_t seed) {
  Rng rng(seed);
  SyntheticCorpus out;
  for (int i = 0; i < n; ++i) {
    const Stance label = static_cast<Stance>(i % 3);
    const int depth = 1 + (i % 4);
    std::vector<corpus::Utterance> utterances;
    for (int d = 0; d < depth; ++d) {
      const std::string id = "u" + std::to_string(d);
      std::string text = neutral_sentence(rng, 3, 3);
      if (d == depth - 1) {
        text = kCueWords[static_cast<int>(label)] + " mem" + std::to_string(i) + " " +
               text;
      }
      utterances.push_back(make_utterance(
          id, text, d == 0 ? std::nullopt : std::optional("u" + std::to_string(d - 1))));
    }
    utterances.back().label = label;
    corpus::ConversationThread thread("ov" + std::to_string(i), "overfit",
                                      std::move(utterances));
    out.instances.push_back(
        leaf_instance(thread, "u" + std::to_string(depth - 1), label));
    out.threads.push_back(std::move(thread));
  }
  return out;
}

SyntheticCorpus context_corpus(int n, std::uint64_t seed,
                               std::vector<std::string> targets) {
  if (targets.empty()) throw std::invalid_argument("context_corpus needs targets");
  Rng rng(seed);
  SyntheticCorpus out;
  for (int i = 0; i < n; ++i) {
    const Stance label = static_cast<Stance>(i % 3);
    const int depth = 2 + static_cast<int>(rng.below(3));
    std::vector<corpus::Utterance> utterances;
    for (int d = 0; d < depth; ++d) {
      const std::string id = "u" + std::to_string(d);
      std::string text = neutral_sentence(rng, 3, 3);
      if (d == 0) {
        // The only place the label shows is the root post.
        text = kCueWords[static_cast<int>(label)] + " " + text;
      }
      utterances.push_back(make_utterance(
          id, text, d == 0 ? std::nullopt : std::optional("u" + std::to_string(d - 1))));
    }
    utterances.back().label = label;
    corpus::ConversationThread thread("cx" + std::to_string(i),
                                      targets[i % targets.size()],
                                      std::move(utterances));
    out.instances.push_back(
        leaf_instance(thread, "u" + std::to_string(depth - 1), label));
    out.threads.push_back(std::move(thread));
  }
  return out;
}

std::vector<corpus::ConversationThread> boundary_threads() {
  const auto word_run = [](int words) {
    std::string out;
    for (int i = 0; i < words; ++i) {
      if (i > 0) out += ' ';
      out += "word" + std::to_string(i);
    }
    return out;
  };
  const auto make_thread = [&](const std::string& id, int root_words, int comments) {
    std::vector<corpus::Utterance> utterances;
    utterances.push_back(make_utterance("root", word_run(root_words), std::nullopt));
    for (int c = 1; c <= comments; ++c) {
      corpus::Utterance u =
          make_utterance("c" + std::to_string(c), "a short reply here", "root");
      if (c == 1) u.label = Stance::Against;
      if (c == 2) u.label = Stance::Favor;
      utterances.push_back(std::move(u));
    }
    return corpus::ConversationThread(id, "boundary", std::move(utterances));
  };
  std::vector<corpus::ConversationThread> threads;
  threads.push_back(make_thread("t14w", 14, 200));
  threads.push_back(make_thread("t15w", 15, 200));
  threads.push_back(make_thread("t150w", 150, 200));
  threads.push_back(make_thread("t151w", 151, 200));
  threads.push_back(make_thread("t199c", 20, 199));
  threads.push_back(make_thread("t200c", 20, 200));
  return threads;
}

Eigen::MatrixXd gcn_reference(const Eigen::MatrixXd& H, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1,
                              glan::Activation activation, bool normalize) {
  const long n = H.rows(), h_in = H.cols();
  const long h_mid = w0.cols(), h_out = w1.cols();
  const auto act = [&](double z) {
    switch (activation) {
      case glan::Activation::ReLU: return z > 0.0 ? z : 0.0;
      case glan::Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
      case glan::Activation::Tanh: return std::tanh(z);
      case glan::Activation::Identity: return z;
    }
    return z;
  };
  std::vector<double> degree(n, 0.0);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) degree[i] += A(i, j);
  }
  const auto edge = [&](long i, long j) {
    if (!normalize) return A(i, j);
    return A(i, j) / std::sqrt(degree[i] * degree[j]);
  };
  Eigen::MatrixXd g1(n, h_mid);
  for (long i = 0; i < n; ++i) {
    for (long k = 0; k < h_mid; ++k) {
      double acc = 0.0;
      for (long j = 0; j < n; ++j) {
        double hw = 0.0;
        for (long c = 0; c < h_in; ++c) hw += H(j, c) * w0(c, k);
        acc += edge(i, j) * hw;
      }
      g1(i, k) = act(acc);
    }
  }
  Eigen::MatrixXd g2(n, h_out);
  for (long i = 0; i < n; ++i) {
    for (long k = 0; k < h_out; ++k) {
      double acc = 0.0;
      for (long j = 0; j < n; ++j) {
        double gw = 0.0;
        for (long c = 0; c < h_mid; ++c) gw += g1(j, c) * w1(c, k);
        acc += edge(i, j) * gw;
      }
      g2(i, k) = act(acc);
    }
  }
  return g2;
}

GradientCheck gradient_check(const glan::GlanConfig& config, const Eigen::MatrixXd& H,
                             const glan::CommentGraph& graph,
                             const Eigen::VectorXd& target_vec, Stance gold,
                             std::uint64_t seed, double step) {
  Rng rng(seed);
  glan::GlanParams params = glan::GlanParams::init(config.hidden_size, rng);
  glan::GlanParams grads = glan::GlanParams::zeros(config.hidden_size);
  const glan::GlanModel model(config, params);
  model.forward_backward(H, graph, target_vec, gold, grads);

  const auto loss_at = [&](const glan::GlanParams& p) {
    const glan::GlanModel m(config, p);
    return glan::loss(m.predict(H, graph, target_vec), gold);
  };

  GradientCheck result;
  auto grad_refs = grads.tensors();
  auto param_refs = params.tensors();
  for (std::size_t t = 0; t < param_refs.size(); ++t) {
    for (long i = 0; i < param_refs[t].size(); ++i) {
      const double saved = param_refs[t].data[i];
      param_refs[t].data[i] = saved + step;
      const double up = loss_at(params);
      param_refs[t].data[i] = saved - step;
      const double down = loss_at(params);
      param_refs[t].data[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grad_refs[t].data[i];
      // Relative where the gradient is healthy; floored so a zero gradient
      // against finite-difference noise is not scored as infinite error.
      const double denom =
          std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.elements;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_tensor = param_refs[t].name;
      }
    }
  }
  return result;
}

TempDir::TempDir(const std::string& prefix) {
  static std::atomic<unsigned> counter{0};
  const unsigned id = counter.fetch_add(1);
  path_ = std::filesystem::temp_directory_path() /
          (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(id));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name) const {
  return (path_ / name).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

}  // namespace stance::testing
