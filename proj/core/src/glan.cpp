#include "stance/glan.hpp"

#include <cmath>
#include <utility>

#include "stance/errors.hpp"

namespace stance::glan {

namespace {

constexpr double kLayerNormEpsilon = 1e-5;

void require(bool ok, const std::string& message) {
  if (!ok) throw ContractViolation(message);
}

void require_finite(const Eigen::MatrixXd& m, const std::string& what) {
  if (!m.allFinite()) throw ContractViolation(what + " contains non-finite values");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const double shift = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - shift).exp();
  return e / e.sum();
}

double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Tanh: return std::tanh(z);
    case Activation::Identity: return z;
  }
  throw ContractViolation("unhandled activation");
}

double activation_derivative(Activation a, double z) {
  switch (a) {
    case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Identity: return 1.0;
  }
  throw ContractViolation("unhandled activation");
}

Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z) {
  return z.unaryExpr([a](double v) { return apply_activation(a, v); });
}

Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z) {
  return z.unaryExpr([a](double v) { return activation_derivative(a, v); });
}

// Row i of the result is row i-1 of the input; row 0 is zero.
Eigen::MatrixXd shift_down(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  if (m.rows() > 1) out.bottomRows(m.rows() - 1) = m.topRows(m.rows() - 1);
  return out;
}

// Row i of the result is row i+1 of the input; the last row is zero.
Eigen::MatrixXd shift_up(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  if (m.rows() > 1) out.topRows(m.rows() - 1) = m.bottomRows(m.rows() - 1);
  return out;
}

void check_conv(const Conv1dParams& conv, long h_in, const char* which) {
  if (conv.k_prev.rows() != h_in || conv.k_curr.rows() != h_in ||
      conv.k_prev.cols() != conv.k_curr.cols() ||
      conv.bias.size() != conv.k_curr.cols()) {
    throw ContractViolation(std::string(which) + " kernel shapes do not match the input width");
  }
}

// pre[i] = bias + x[i-1] k_prev + x[i] k_curr, with x[-1] = 0.
Eigen::MatrixXd causal_conv_pre(const Eigen::MatrixXd& x, const Conv1dParams& conv) {
  Eigen::MatrixXd pre = shift_down(x) * conv.k_prev + x * conv.k_curr;
  pre.rowwise() += conv.bias.transpose();
  return pre;
}

void layer_norm_rows(const Eigen::MatrixXd& x, const LayerNormParams& ln,
                     Eigen::MatrixXd& xhat, Eigen::VectorXd& inv_std,
                     Eigen::MatrixXd& y) {
  const long n = x.rows(), h = x.cols();
  xhat.resize(n, h);
  inv_std.resize(n);
  y.resize(n, h);
  for (long r = 0; r < n; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_std(r) = is;
    xhat.row(r) = (x.row(r).array() - mu) * is;
    y.row(r) = xhat.row(r).cwiseProduct(ln.gain.transpose()) + ln.bias.transpose();
  }
}

struct HopTrace {
  Eigen::MatrixXd input;    // hop input B
  Eigen::VectorXd weights;  // attention weights over the rows of B
  Eigen::MatrixXd sig;      // sigmoid(row-scaled B)
  Eigen::MatrixXd xhat;     // normalized rows
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd output;
};

struct StackTrace {
  std::vector<HopTrace> hops;
  Eigen::VectorXd pooled;
};

void run_stack(const Eigen::MatrixXd& branch, const Eigen::MatrixXd& H,
               const LayerNormParams& ln, double residual_scale, int hops,
               StackTrace& trace) {
  trace.hops.clear();
  trace.hops.reserve(static_cast<std::size_t>(hops));
  Eigen::MatrixXd current = branch;
  for (int k = 0; k < hops; ++k) {
    HopTrace hop;
    hop.input = current;
    hop.weights = attention_weights(current);
    const Eigen::MatrixXd scaled = hop.weights.asDiagonal() * current;
    hop.sig = scaled.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Eigen::MatrixXd y;
    layer_norm_rows(hop.sig, ln, hop.xhat, hop.inv_std, y);
    hop.output = residual_scale * y + H;
    current = hop.output;
    trace.hops.push_back(std::move(hop));
  }
  trace.pooled = current.colwise().sum().transpose();
}

// Backward through the hop stack and pooling. d_pooled is the gradient of the
// loss w.r.t. the pooled vector; returns the gradient w.r.t. the branch
// matrix. The residual path carries the frozen sentence matrix, so its
// gradient is dropped.
Eigen::MatrixXd stack_backward(const StackTrace& trace, const LayerNormParams& ln,
                               double residual_scale, const Eigen::VectorXd& d_pooled,
                               LayerNormParams& d_ln) {
  const long n = trace.hops.front().input.rows();
  const long h = trace.hops.front().input.cols();
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(n, h);
  d_out.rowwise() += d_pooled.transpose();  // column-sum pooling

  for (auto it = trace.hops.rbegin(); it != trace.hops.rend(); ++it) {
    const HopTrace& hop = *it;
    const Eigen::MatrixXd d_y = residual_scale * d_out;

    // LayerNorm backward, row by row.
    Eigen::MatrixXd d_sig(n, h);
    for (long r = 0; r < n; ++r) {
      const Eigen::RowVectorXd dy = d_y.row(r);
      const Eigen::RowVectorXd xh = hop.xhat.row(r);
      d_ln.bias += dy.transpose();
      d_ln.gain += dy.cwiseProduct(xh).transpose();
      const Eigen::RowVectorXd d_xhat = dy.cwiseProduct(ln.gain.transpose());
      const double m1 = d_xhat.mean();
      const double m2 = d_xhat.cwiseProduct(xh).mean();
      d_sig.row(r) = hop.inv_std(r) * (d_xhat.array() - m1 - xh.array() * m2);
    }

    const Eigen::MatrixXd d_scaled =
        d_sig.cwiseProduct(hop.sig.cwiseProduct((1.0 - hop.sig.array()).matrix()));

    // Attention backward: scaled[t] = w_t * B[t], scores u_t = B[n-1] . B[t].
    const Eigen::MatrixXd& b = hop.input;
    Eigen::MatrixXd d_b = hop.weights.asDiagonal() * d_scaled;
    Eigen::VectorXd d_w(n);
    for (long t = 0; t < n; ++t) d_w(t) = d_scaled.row(t).dot(b.row(t));
    const double dot = hop.weights.dot(d_w);
    const Eigen::VectorXd d_u =
        hop.weights.cwiseProduct((d_w.array() - dot).matrix());
    const Eigen::RowVectorXd q = b.row(n - 1);
    d_b += d_u * q;                       // through each score's B[t] factor
    d_b.row(n - 1) += (d_u.transpose() * b);  // through the query row

    d_out = d_b;
  }
  return d_out;
}

void check_vector(const Eigen::VectorXd& v, long size, const char* what) {
  if (v.size() != size) {
    throw ContractViolation(std::string(what) + " has the wrong size");
  }
}

std::vector<std::string> path_texts(const corpus::StanceInstance& instance,
                                    const corpus::ConversationThread& thread) {
  std::vector<std::string> texts;
  texts.reserve(instance.path.size());
  for (const std::string& id : instance.path) {
    texts.push_back(thread.utterance(id).text);
  }
  return texts;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ConfigError("unknown nonlinearity '" + name +
                    "' (expected relu, sigmoid, tanh, or identity)");
}

const std::string& to_string(Activation a) {
  static const std::string names[] = {"relu", "sigmoid", "tanh", "identity"};
  return names[static_cast<int>(a)];
}

GlanConfig GlanConfig::from_config(const Config& config, int encoder_hidden_size) {
  GlanConfig out;
  out.hidden_size = static_cast<int>(config.get_int("glan.hidden_size", encoder_hidden_size));
  if (out.hidden_size != encoder_hidden_size) {
    throw ConfigError("glan.hidden_size (" + std::to_string(out.hidden_size) +
                      ") must match the encoder hidden size (" +
                      std::to_string(encoder_hidden_size) + ")");
  }
  out.residual_scale = config.get_double("glan.lambda", 0.1);
  out.hops = static_cast<int>(config.get_int("glan.hops", 3));
  out.gcn_activation = activation_from_string(config.get_string("glan.gcn_nonlinearity", "relu"));
  out.conv_activation = activation_from_string(config.get_string("glan.conv_nonlinearity", "relu"));
  out.normalize_adjacency = config.get_bool("glan.gcn_normalize", true);
  out.use_global = config.get_bool("glan.use_global", true);
  out.use_local = config.get_bool("glan.use_local", true);
  out.use_structural = config.get_bool("glan.use_structural", true);
  out.use_target_attention = config.get_bool("glan.use_target_attention", true);
  out.validate();
  return out;
}

void GlanConfig::validate() const {
  if (hidden_size < 1) throw ConfigError("glan.hidden_size must be at least 1");
  if (hops < 1) throw ConfigError("glan.hops must be at least 1");
  if (!(residual_scale >= 0.0 && residual_scale <= 1.0)) {
    throw ConfigError("glan.lambda must lie in [0, 1]");
  }
  if (enabled_branches() == 0) {
    throw ConfigError("at least one of the global/local/structural branches must be enabled");
  }
}

CommentGraph CommentGraph::chain(int n) {
  require(n >= 1, "comment graph needs at least one node");
  CommentGraph g;
  g.adjacency = Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    g.adjacency(i, i + 1) = 1.0;
    g.adjacency(i + 1, i) = 1.0;
  }
  return g;
}

CommentGraph CommentGraph::from_edges(int n,
                                      const std::vector<std::pair<int, int>>& edges) {
  require(n >= 1, "comment graph needs at least one node");
  CommentGraph g;
  g.adjacency = Eigen::MatrixXd::Identity(n, n);
  for (const auto& [a, b] : edges) {
    require(a >= 0 && a < n && b >= 0 && b < n, "comment graph edge endpoint out of range");
    g.adjacency(a, b) = 1.0;
    g.adjacency(b, a) = 1.0;
  }
  return g;
}

Eigen::MatrixXd CommentGraph::normalized() const {
  const Eigen::VectorXd degree = adjacency.rowwise().sum();
  const Eigen::VectorXd scale = degree.array().rsqrt();
  return scale.asDiagonal() * adjacency * scale.asDiagonal();
}

GlanParams GlanParams::init(int hidden_size, Rng& rng) {
  GlanParams p = zeros(hidden_size);
  const auto fill = [&rng](Eigen::MatrixXd& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    double* data = m.data();
    for (long i = 0; i < m.size(); ++i) data[i] = rng.uniform(-bound, bound);
  };
  fill(p.conv1.k_prev);
  fill(p.conv1.k_curr);
  fill(p.conv2.k_prev);
  fill(p.conv2.k_curr);
  fill(p.gcn_w0);
  fill(p.gcn_w1);
  fill(p.head_weight);
  p.ln_global.gain.setOnes();
  p.ln_local.gain.setOnes();
  p.ln_structural.gain.setOnes();
  return p;
}

GlanParams GlanParams::zeros(int hidden_size) {
  require(hidden_size >= 1, "hidden size must be at least 1");
  const long h = hidden_size;
  GlanParams p;
  p.conv1 = {Eigen::MatrixXd::Zero(h, h), Eigen::MatrixXd::Zero(h, h),
             Eigen::VectorXd::Zero(h)};
  p.conv2 = {Eigen::MatrixXd::Zero(h, h), Eigen::MatrixXd::Zero(h, h),
             Eigen::VectorXd::Zero(h)};
  p.gcn_w0 = Eigen::MatrixXd::Zero(h, h);
  p.gcn_w1 = Eigen::MatrixXd::Zero(h, h);
  p.ln_global = {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(h)};
  p.ln_local = {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(h)};
  p.ln_structural = {Eigen::VectorXd::Zero(h), Eigen::VectorXd::Zero(h)};
  p.head_weight = Eigen::MatrixXd::Zero(3 * h, 3);
  p.head_bias = Eigen::VectorXd::Zero(3);
  return p;
}

std::vector<GlanParams::TensorRef> GlanParams::tensors() {
  return {
      {"conv1.k_prev", conv1.k_prev.data(), conv1.k_prev.rows(), conv1.k_prev.cols()},
      {"conv1.k_curr", conv1.k_curr.data(), conv1.k_curr.rows(), conv1.k_curr.cols()},
      {"conv1.bias", conv1.bias.data(), conv1.bias.size(), 1},
      {"conv2.k_prev", conv2.k_prev.data(), conv2.k_prev.rows(), conv2.k_prev.cols()},
      {"conv2.k_curr", conv2.k_curr.data(), conv2.k_curr.rows(), conv2.k_curr.cols()},
      {"conv2.bias", conv2.bias.data(), conv2.bias.size(), 1},
      {"gcn.w0", gcn_w0.data(), gcn_w0.rows(), gcn_w0.cols()},
      {"gcn.w1", gcn_w1.data(), gcn_w1.rows(), gcn_w1.cols()},
      {"ln_global.gain", ln_global.gain.data(), ln_global.gain.size(), 1},
      {"ln_global.bias", ln_global.bias.data(), ln_global.bias.size(), 1},
      {"ln_local.gain", ln_local.gain.data(), ln_local.gain.size(), 1},
      {"ln_local.bias", ln_local.bias.data(), ln_local.bias.size(), 1},
      {"ln_structural.gain", ln_structural.gain.data(), ln_structural.gain.size(), 1},
      {"ln_structural.bias", ln_structural.bias.data(), ln_structural.bias.size(), 1},
      {"head.weight", head_weight.data(), head_weight.rows(), head_weight.cols()},
      {"head.bias", head_bias.data(), head_bias.size(), 1},
  };
}

std::vector<GlanParams::ConstTensorRef> GlanParams::tensors() const {
  std::vector<ConstTensorRef> out;
  auto mutable_refs = const_cast<GlanParams*>(this)->tensors();
  out.reserve(mutable_refs.size());
  for (const TensorRef& r : mutable_refs) {
    out.push_back({r.name, r.data, r.rows, r.cols});
  }
  return out;
}

void GlanParams::set_zero() {
  for (TensorRef& t : tensors()) {
    std::fill(t.data, t.data + t.size(), 0.0);
  }
}

Eigen::VectorXd attention_weights(const Eigen::MatrixXd& rows) {
  require(rows.rows() >= 1, "attention needs at least one row");
  require_finite(rows, "attention input");
  const Eigen::VectorXd scores = rows * rows.row(rows.rows() - 1).transpose();
  return softmax(scores);
}

Eigen::MatrixXd global_branch(const Eigen::MatrixXd& H) {
  const Eigen::VectorXd w = attention_weights(H);
  return w.asDiagonal() * H;
}

Eigen::MatrixXd local_branch(const Eigen::MatrixXd& H, const Conv1dParams& conv1,
                             const Conv1dParams& conv2, Activation activation) {
  require(H.rows() >= 1, "local layer needs at least one row");
  require_finite(H, "local layer input");
  check_conv(conv1, H.cols(), "first convolution");
  const Eigen::MatrixXd out1 = apply_activation(activation, causal_conv_pre(H, conv1));
  check_conv(conv2, out1.cols(), "second convolution");
  return apply_activation(activation, causal_conv_pre(out1, conv2));
}

Eigen::MatrixXd structural_branch(const Eigen::MatrixXd& H, const CommentGraph& graph,
                                  const Eigen::MatrixXd& w0, const Eigen::MatrixXd& w1,
                                  Activation activation, bool normalize_adjacency) {
  require(H.rows() >= 1, "structural layer needs at least one row");
  require_finite(H, "structural layer input");
  require(graph.size() == H.rows(), "comment graph size must match the utterance count");
  require(w0.rows() == H.cols() && w1.rows() == w0.cols(),
          "graph convolution weight shapes do not chain");
  const Eigen::MatrixXd a =
      normalize_adjacency ? graph.normalized() : graph.adjacency;
  const Eigen::MatrixXd g1 = apply_activation(activation, a * H * w0);
  return apply_activation(activation, a * g1 * w1);
}

Eigen::MatrixXd mha_hop(const Eigen::MatrixXd& branch, const Eigen::MatrixXd& H,
                        const LayerNormParams& ln, double residual_scale) {
  require(branch.rows() == H.rows() && branch.cols() == H.cols(),
          "hop input must match the sentence matrix shape");
  require(ln.gain.size() == branch.cols() && ln.bias.size() == branch.cols(),
          "layer norm parameter size must match the hidden size");
  require_finite(branch, "hop input");
  const Eigen::VectorXd w = attention_weights(branch);
  const Eigen::MatrixXd scaled = w.asDiagonal() * branch;
  const Eigen::MatrixXd sig =
      scaled.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Eigen::MatrixXd xhat, y;
  Eigen::VectorXd inv_std;
  layer_norm_rows(sig, ln, xhat, inv_std, y);
  return residual_scale * y + H;
}

Eigen::VectorXd mha_stack(const Eigen::MatrixXd& branch, const Eigen::MatrixXd& H,
                          const LayerNormParams& ln, double residual_scale, int hops) {
  require(hops >= 1, "hop count must be at least 1");
  Eigen::MatrixXd current = branch;
  for (int k = 0; k < hops; ++k) current = mha_hop(current, H, ln, residual_scale);
  return current.colwise().sum().transpose();
}

Eigen::VectorXd target_attention(const Eigen::VectorXd& h_g, const Eigen::VectorXd& h_l,
                                 const Eigen::VectorXd& h_s,
                                 const Eigen::VectorXd& target_vec,
                                 const BranchGates& gates) {
  const long h = target_vec.size();
  require(h >= 1, "target vector must be non-empty");
  check_vector(h_g, h, "global branch vector");
  check_vector(h_l, h, "local branch vector");
  check_vector(h_s, h, "structural branch vector");
  const bool enabled[3] = {gates.global, gates.local, gates.structural};
  const Eigen::VectorXd* pooled[3] = {&h_g, &h_l, &h_s};
  int count = 0;
  for (bool e : enabled) count += e ? 1 : 0;
  if (count == 0) throw ConfigError("target attention requires at least one enabled branch");

  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();
  if (gates.target_attention) {
    std::vector<double> scores;
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) scores.push_back(target_vec.dot(*pooled[b]));
    }
    const Eigen::VectorXd sm =
        softmax(Eigen::Map<const Eigen::VectorXd>(scores.data(), scores.size()));
    int slot = 0;
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) alpha(b) = sm(slot++);
    }
  } else {
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) alpha(b) = 1.0 / count;
    }
  }

  Eigen::VectorXd feature = Eigen::VectorXd::Zero(3 * h);
  for (int b = 0; b < 3; ++b) {
    if (enabled[b]) feature.segment(b * h, h) = alpha(b) * (*pooled[b]);
  }
  return feature;
}

StancePrediction classify(const Eigen::VectorXd& feature,
                          const Eigen::MatrixXd& head_weight,
                          const Eigen::VectorXd& head_bias) {
  require(head_weight.rows() == feature.size() && head_weight.cols() == 3 &&
              head_bias.size() == 3,
          "classifier head shapes do not match the feature size");
  require_finite(feature, "classifier input");
  StancePrediction pred;
  pred.logits = head_weight.transpose() * feature + head_bias;
  const double shift = pred.logits.maxCoeff();
  const Eigen::Vector3d e = (pred.logits.array() - shift).exp();
  pred.probabilities = e / e.sum();
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (pred.logits(i) > pred.logits(best)) best = i;
  }
  pred.label = static_cast<Stance>(best);
  return pred;
}

double loss(const StancePrediction& prediction, Stance gold) {
  const double shift = prediction.logits.maxCoeff();
  const double lse = shift + std::log((prediction.logits.array() - shift).exp().sum());
  return lse - prediction.logits(static_cast<int>(gold));
}

GlanModel::GlanModel(GlanConfig config, GlanParams params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  if (params_.gcn_w0.rows() != config_.hidden_size) {
    throw ContractViolation("parameter shapes do not match the configured hidden size");
  }
}

StancePrediction GlanModel::predict(const Eigen::MatrixXd& H, const CommentGraph& graph,
                                    const Eigen::VectorXd& target_vec) const {
  const long h = config_.hidden_size;
  require(H.rows() >= 1, "sentence matrix must have at least one row");
  require(H.cols() == h, "sentence matrix width must equal the hidden size");
  check_vector(target_vec, h, "target vector");
  require_finite(H, "sentence matrix");

  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd h_g = zero, h_l = zero, h_s = zero;
  if (config_.use_global) {
    h_g = mha_stack(global_branch(H), H, params_.ln_global, config_.residual_scale,
                    config_.hops);
  }
  if (config_.use_local) {
    h_l = mha_stack(
        local_branch(H, params_.conv1, params_.conv2, config_.conv_activation), H,
        params_.ln_local, config_.residual_scale, config_.hops);
  }
  if (config_.use_structural) {
    h_s = mha_stack(structural_branch(H, graph, params_.gcn_w0, params_.gcn_w1,
                                      config_.gcn_activation, config_.normalize_adjacency),
                    H, params_.ln_structural, config_.residual_scale, config_.hops);
  }
  const BranchGates gates{config_.use_global, config_.use_local, config_.use_structural,
                          config_.use_target_attention};
  return classify(target_attention(h_g, h_l, h_s, target_vec, gates),
                  params_.head_weight, params_.head_bias);
}

double GlanModel::forward_backward(const Eigen::MatrixXd& H, const CommentGraph& graph,
                                   const Eigen::VectorXd& target_vec, Stance gold,
                                   GlanParams& grads) const {
  const long h = config_.hidden_size;
  const long n = H.rows();
  require(n >= 1, "sentence matrix must have at least one row");
  require(H.cols() == h, "sentence matrix width must equal the hidden size");
  check_vector(target_vec, h, "target vector");
  require_finite(H, "sentence matrix");
  if (grads.gcn_w0.rows() != h) {
    throw ContractViolation("gradient accumulator shape does not match the model");
  }

  // ---- forward, recording intermediates -------------------------------

  Eigen::MatrixXd a_used;  // adjacency used by the structural layer
  Eigen::MatrixXd gcn_pre1, gcn_g1, gcn_pre2;
  Eigen::MatrixXd conv_pre1, conv_out1, conv_pre2;
  Eigen::MatrixXd branch_g, branch_l, branch_s;

  StackTrace stack_g, stack_l, stack_s;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd h_g = zero, h_l = zero, h_s = zero;

  if (config_.use_global) {
    branch_g = global_branch(H);
    run_stack(branch_g, H, params_.ln_global, config_.residual_scale, config_.hops,
              stack_g);
    h_g = stack_g.pooled;
  }
  if (config_.use_local) {
    check_conv(params_.conv1, h, "first convolution");
    check_conv(params_.conv2, h, "second convolution");
    conv_pre1 = causal_conv_pre(H, params_.conv1);
    conv_out1 = apply_activation(config_.conv_activation, conv_pre1);
    conv_pre2 = causal_conv_pre(conv_out1, params_.conv2);
    branch_l = apply_activation(config_.conv_activation, conv_pre2);
    run_stack(branch_l, H, params_.ln_local, config_.residual_scale, config_.hops,
              stack_l);
    h_l = stack_l.pooled;
  }
  if (config_.use_structural) {
    require(graph.size() == n, "comment graph size must match the utterance count");
    a_used = config_.normalize_adjacency ? graph.normalized() : graph.adjacency;
    gcn_pre1 = a_used * H * params_.gcn_w0;
    gcn_g1 = apply_activation(config_.gcn_activation, gcn_pre1);
    gcn_pre2 = a_used * gcn_g1 * params_.gcn_w1;
    branch_s = apply_activation(config_.gcn_activation, gcn_pre2);
    run_stack(branch_s, H, params_.ln_structural, config_.residual_scale, config_.hops,
              stack_s);
    h_s = stack_s.pooled;
  }

  const bool enabled[3] = {config_.use_global, config_.use_local, config_.use_structural};
  const Eigen::VectorXd* pooled[3] = {&h_g, &h_l, &h_s};
  const BranchGates gates{config_.use_global, config_.use_local, config_.use_structural,
                          config_.use_target_attention};
  const Eigen::VectorXd feature = target_attention(h_g, h_l, h_s, target_vec, gates);
  const StancePrediction pred = classify(feature, params_.head_weight, params_.head_bias);
  const double loss_value = loss(pred, gold);

  // The attention weights actually used (zero for disabled branches).
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();
  if (config_.use_target_attention) {
    std::vector<double> scores;
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) scores.push_back(target_vec.dot(*pooled[b]));
    }
    const Eigen::VectorXd sm =
        softmax(Eigen::Map<const Eigen::VectorXd>(scores.data(), scores.size()));
    int slot = 0;
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) alpha(b) = sm(slot++);
    }
  } else {
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) alpha(b) = 1.0 / config_.enabled_branches();
    }
  }

  // ---- backward ---------------------------------------------------------

  Eigen::Vector3d d_logits = pred.probabilities;
  d_logits(static_cast<int>(gold)) -= 1.0;

  grads.head_bias += d_logits;
  grads.head_weight += feature * d_logits.transpose();
  const Eigen::VectorXd d_feature = params_.head_weight * d_logits;

  // Target attention backward: feature block b is alpha_b * pooled_b.
  Eigen::VectorXd d_pooled_vec[3] = {zero, zero, zero};
  Eigen::Vector3d d_alpha = Eigen::Vector3d::Zero();
  for (int b = 0; b < 3; ++b) {
    if (!enabled[b]) continue;
    const Eigen::VectorXd d_block = d_feature.segment(b * h, h);
    d_alpha(b) = d_block.dot(*pooled[b]);
    d_pooled_vec[b] = alpha(b) * d_block;
  }
  if (config_.use_target_attention) {
    // Softmax Jacobian over the enabled entries; score_b = target . pooled_b.
    double dot = 0.0;
    for (int b = 0; b < 3; ++b) {
      if (enabled[b]) dot += alpha(b) * d_alpha(b);
    }
    for (int b = 0; b < 3; ++b) {
      if (!enabled[b]) continue;
      const double d_score = alpha(b) * (d_alpha(b) - dot);
      d_pooled_vec[b] += d_score * target_vec;
    }
  }

  if (config_.use_global) {
    // No parameters upstream of the global branch matrix besides the norm.
    stack_backward(stack_g, params_.ln_global, config_.residual_scale, d_pooled_vec[0],
                   grads.ln_global);
  }
  if (config_.use_local) {
    const Eigen::MatrixXd d_branch = stack_backward(
        stack_l, params_.ln_local, config_.residual_scale, d_pooled_vec[1], grads.ln_local);
    const Eigen::MatrixXd d_pre2 =
        d_branch.cwiseProduct(activation_derivative(config_.conv_activation, conv_pre2));
    grads.conv2.bias += d_pre2.colwise().sum().transpose();
    grads.conv2.k_curr += conv_out1.transpose() * d_pre2;
    grads.conv2.k_prev += shift_down(conv_out1).transpose() * d_pre2;
    const Eigen::MatrixXd d_out1 = d_pre2 * params_.conv2.k_curr.transpose() +
                                   shift_up(d_pre2) * params_.conv2.k_prev.transpose();
    const Eigen::MatrixXd d_pre1 =
        d_out1.cwiseProduct(activation_derivative(config_.conv_activation, conv_pre1));
    grads.conv1.bias += d_pre1.colwise().sum().transpose();
    grads.conv1.k_curr += H.transpose() * d_pre1;
    grads.conv1.k_prev += shift_down(H).transpose() * d_pre1;
  }
  if (config_.use_structural) {
    const Eigen::MatrixXd d_branch =
        stack_backward(stack_s, params_.ln_structural, config_.residual_scale,
                       d_pooled_vec[2], grads.ln_structural);
    const Eigen::MatrixXd d_pre2 =
        d_branch.cwiseProduct(activation_derivative(config_.gcn_activation, gcn_pre2));
    grads.gcn_w1 += (a_used * gcn_g1).transpose() * d_pre2;
    const Eigen::MatrixXd d_g1 = a_used.transpose() * (d_pre2 * params_.gcn_w1.transpose());
    const Eigen::MatrixXd d_pre1 =
        d_g1.cwiseProduct(activation_derivative(config_.gcn_activation, gcn_pre1));
    grads.gcn_w0 += (a_used * H).transpose() * d_pre1;
  }

  return loss_value;
}

StancePrediction forward(const corpus::StanceInstance& instance,
                         const corpus::ConversationThread& thread,
                         const encoding::ContextualEncoder& encoder,
                         const GlanModel& model) {
  const encoding::EncoderInput input =
      encoding::build_encoder_input(path_texts(instance, thread), encoder.max_length());
  const Eigen::MatrixXd H = encoding::encode_utterances(input, encoder);
  const CommentGraph graph = CommentGraph::chain(static_cast<int>(H.rows()));
  const Eigen::VectorXd target_vec = encoding::encode_target(instance.target, encoder);
  return model.predict(H, graph, target_vec);
}

}  // namespace stance::glan
