#pragma once

// Deterministic fixtures shared by the unit tests and the acceptance gate:
// synthetic corpora with known structure, a loop-based graph-convolution
// reference, a finite-difference gradient check, and scratch-dir plumbing.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stance/corpus.hpp"
#include "stance/glan.hpp"
#include "stance/label.hpp"

namespace stance::testing {

struct SyntheticCorpus {
  std::vector<corpus::ConversationThread> threads;
  std::vector<corpus::StanceInstance> instances;
};

// One labeled leaf per thread; the label is decided by a cue token inside the
// leaf itself, so the mapping is memorizable from the final sentence alone.
SyntheticCorpus overfit_corpus(int n = 32, std::uint64_t seed = 9);

// One labeled leaf per thread; the cue token appears only in the root (a
// strict ancestor), and the leaf is drawn from a label-independent
// vocabulary. A model that sees just the final sentence is stuck near the
// class prior. Instances cycle through `targets`; the cue vocabulary is
// shared across targets so learned cues transfer.
SyntheticCorpus context_corpus(int n, std::uint64_t seed = 17,
                               std::vector<std::string> targets = {"power"});

// Six threads pinning the preprocessing boundaries: root word counts
// 14 / 15 / 150 / 151 (with 200 comments each) and comment counts 199 / 200
// (with a 20-word root). Accepted threads carry two labeled comments.
std::vector<corpus::ConversationThread> boundary_threads();

// Two-layer graph convolution computed with nothing but scalar loops and the
// 1/sqrt(deg_i * deg_j) normalization, as an independent reference for the
// matrix-product implementation.
Eigen::MatrixXd gcn_reference(const Eigen::MatrixXd& H, const Eigen::MatrixXd& A,
                              const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1,
                              glan::Activation activation, bool normalize);

// Central-difference check of the analytic gradients against the full
// forward pass, over every element of every parameter tensor.
struct GradientCheck {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  long elements = 0;
};
GradientCheck gradient_check(const glan::GlanConfig& config, const Eigen::MatrixXd& H,
                             const glan::CommentGraph& graph,
                             const Eigen::VectorXd& target_vec, Stance gold,
                             std::uint64_t seed, double step);

// Self-deleting scratch directory under the system temp root.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const;

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace stance::testing
