#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/encoding.hpp"
#include "stance/label.hpp"
#include "stance/rng.hpp"

namespace stance::glan {

enum class Activation { ReLU, Sigmoid, Tanh, Identity };

Activation activation_from_string(const std::string& name);
const std::string& to_string(Activation a);

// Architecture hyperparameters and ablation gates. residual_scale is the
// multiplier on the attention path inside each MHA hop (config key
// glan.lambda); it is configured, not trained.
struct GlanConfig {
  int hidden_size = 64;
  double residual_scale = 0.1;
  int hops = 3;
  Activation gcn_activation = Activation::ReLU;
  Activation conv_activation = Activation::ReLU;
  bool normalize_adjacency = true;

  bool use_global = true;
  bool use_local = true;
  bool use_structural = true;
  bool use_target_attention = true;

  static GlanConfig from_config(const Config& config, int encoder_hidden_size);
  void validate() const;
  int enabled_branches() const {
    return (use_global ? 1 : 0) + (use_local ? 1 : 0) + (use_structural ? 1 : 0);
  }
};

// Adjacency over the utterances of one conversation path: symmetric, unit
// diagonal, an edge wherever two utterances are in a reply relation.
struct CommentGraph {
  Eigen::MatrixXd adjacency;

  // Reply chain over n utterances (the ancestor-path graph).
  static CommentGraph chain(int n);
  // Arbitrary undirected edges; self-loops are always added.
  static CommentGraph from_edges(int n,
                                 const std::vector<std::pair<int, int>>& edges);

  int size() const { return static_cast<int>(adjacency.rows()); }
  // Symmetric degree normalization D^{-1/2} A D^{-1/2}.
  Eigen::MatrixXd normalized() const;
};

// Width-2 causal convolution over the utterance axis: row i of the output
// mixes rows i-1 and i of the input (row -1 is zero).
struct Conv1dParams {
  Eigen::MatrixXd k_prev;  // h_in x h_out, tap on row i-1
  Eigen::MatrixXd k_curr;  // h_in x h_out, tap on row i
  Eigen::VectorXd bias;    // h_out
};

struct LayerNormParams {
  Eigen::VectorXd gain;
  Eigen::VectorXd bias;
};

// Every trainable tensor of the network. The same struct doubles as the
// gradient accumulator. LayerNorm parameters are shared across the hops of
// one branch.
struct GlanParams {
  Conv1dParams conv1, conv2;
  Eigen::MatrixXd gcn_w0, gcn_w1;        // h x h
  LayerNormParams ln_global, ln_local, ln_structural;
  Eigen::MatrixXd head_weight;           // 3h x 3
  Eigen::VectorXd head_bias;             // 3

  static GlanParams init(int hidden_size, Rng& rng);
  static GlanParams zeros(int hidden_size);

  struct TensorRef {
    std::string name;
    double* data;
    long rows, cols;
    long size() const { return rows * cols; }
  };
  struct ConstTensorRef {
    std::string name;
    const double* data;
    long rows, cols;
    long size() const { return rows * cols; }
  };
  // Fixed enumeration order; checkpoints, the optimizer, and the gradient
  // check all iterate this list.
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;

  void set_zero();
};

struct StancePrediction {
  Eigen::Vector3d logits;         // slot order: against, favor, none
  Eigen::Vector3d probabilities;  // softmax of logits
  Stance label = Stance::Against; // argmax, ties broken by slot order
};

struct BranchGates {
  bool global = true;
  bool local = true;
  bool structural = true;
  bool target_attention = true;
};

// --- Branch operations -------------------------------------------------------

// Softmax over t of (last row . row t); the attention rule shared by the
// global layer and the Att step inside each MHA hop.
Eigen::VectorXd attention_weights(const Eigen::MatrixXd& rows);

// Global layer: rows of H scaled by their attention weight.
Eigen::MatrixXd global_branch(const Eigen::MatrixXd& H);

// Local layer: two width-2 causal convolutions, activation after each.
Eigen::MatrixXd local_branch(const Eigen::MatrixXd& H, const Conv1dParams& conv1,
                             const Conv1dParams& conv2, Activation activation);

// Structural layer: two-layer graph convolution over the comment graph.
Eigen::MatrixXd structural_branch(const Eigen::MatrixXd& H, const CommentGraph& graph,
                                  const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1,
                                  Activation activation, bool normalize_adjacency);

// One MHA hop: residual_scale * LN(sigmoid(Att(branch))) + H. H is the
// original sentence matrix regardless of hop index.
Eigen::MatrixXd mha_hop(const Eigen::MatrixXd& branch, const Eigen::MatrixXd& H,
                        const LayerNormParams& ln, double residual_scale);

// `hops` chained hops followed by column-sum pooling.
Eigen::VectorXd mha_stack(const Eigen::MatrixXd& branch, const Eigen::MatrixXd& H,
                          const LayerNormParams& ln, double residual_scale, int hops);

// Gate the three pooled branch vectors by softmax of their dot product with
// the target vector; returns the 3h concatenation (disabled branches
// contribute zeros, the softmax renormalizes over what remains).
Eigen::VectorXd target_attention(const Eigen::VectorXd& h_g, const Eigen::VectorXd& h_l,
                                 const Eigen::VectorXd& h_s,
                                 const Eigen::VectorXd& target_vec,
                                 const BranchGates& gates = {});

StancePrediction classify(const Eigen::VectorXd& feature,
                          const Eigen::MatrixXd& head_weight,
                          const Eigen::VectorXd& head_bias);

// Cross-entropy of the gold class.
double loss(const StancePrediction& prediction, Stance gold);

// --- Model --------------------------------------------------------------------

class GlanModel {
 public:
  GlanModel(GlanConfig config, GlanParams params);

  const GlanConfig& config() const { return config_; }
  const GlanParams& params() const { return params_; }
  GlanParams& params() { return params_; }

  StancePrediction predict(const Eigen::MatrixXd& H, const CommentGraph& graph,
                           const Eigen::VectorXd& target_vec) const;

  // Training path: forward with recorded intermediates, then analytic
  // backward. Gradients are accumulated into `grads`; returns the loss.
  double forward_backward(const Eigen::MatrixXd& H, const CommentGraph& graph,
                          const Eigen::VectorXd& target_vec, Stance gold,
                          GlanParams& grads) const;

 private:
  GlanConfig config_;
  GlanParams params_;
};

// Full composition for one instance: resolve the ancestor path in the
// thread, build the encoder input, encode, and run the network.
StancePrediction forward(const corpus::StanceInstance& instance,
                         const corpus::ConversationThread& thread,
                         const encoding::ContextualEncoder& encoder,
                         const GlanModel& model);

}  // namespace stance::glan
