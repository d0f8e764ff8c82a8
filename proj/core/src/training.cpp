#include "stance/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "stance/errors.hpp"
#include "stance/rng.hpp"

namespace stance::training {

using nlohmann::json;

Setting setting_from_string(const std::string& name) {
  if (name == "sentence_only") return Setting::SentenceOnly;
  if (name == "with_history") return Setting::WithHistory;
  throw ConfigError("unknown setting '" + name +
                    "' (expected sentence_only or with_history)");
}

const std::string& to_string(Setting s) {
  static const std::string names[] = {"sentence_only", "with_history"};
  return names[static_cast<int>(s)];
}

TrainConfig TrainConfig::from_config(const Config& config) {
  TrainConfig out;
  out.seed = config.get_seed("seed", 1);
  out.epochs = static_cast<int>(config.get_int("train.epochs", 10));
  out.batch_size = static_cast<int>(config.get_int("train.batch_size", 16));
  out.lr_encoder = config.get_double("train.lr_encoder", 2e-5);
  out.lr_head = config.get_double("train.lr_head", 1e-3);
  out.patience = static_cast<int>(config.get_int("train.patience", 0));
  out.setting = setting_from_string(config.get_string("train.setting", "with_history"));
  out.head_only = config.get_bool("train.head_only", false);
  out.validate();
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(lr_encoder > 0.0)) throw ConfigError("train.lr_encoder must be positive");
  if (!(lr_head > 0.0)) throw ConfigError("train.lr_head must be positive");
  if (patience < 0) throw ConfigError("train.patience must be nonnegative");
}

Dataset prepare_dataset(const std::vector<corpus::StanceInstance>& instances,
                        const std::vector<corpus::ConversationThread>& threads,
                        const encoding::ContextualEncoder& encoder, Setting setting) {
  std::map<std::string, const corpus::ConversationThread*> by_id;
  for (const corpus::ConversationThread& t : threads) by_id[t.thread_id()] = &t;

  std::map<std::string, Eigen::VectorXd> target_cache;
  Dataset out;
  out.instances.reserve(instances.size());
  for (const corpus::StanceInstance& inst : instances) {
    auto it = by_id.find(inst.thread_id);
    if (it == by_id.end()) {
      throw IntegrityError("instance " + inst.instance_id +
                           " references unknown thread " + inst.thread_id);
    }
    const corpus::ConversationThread& thread = *it->second;
    if (inst.path.empty()) {
      throw IntegrityError("instance " + inst.instance_id + " has an empty path");
    }

    std::vector<std::string> texts;
    if (setting == Setting::SentenceOnly) {
      texts.push_back(thread.utterance(inst.path.back()).text);
    } else {
      texts.reserve(inst.path.size());
      for (const std::string& id : inst.path) {
        texts.push_back(thread.utterance(id).text);
      }
    }

    PreparedInstance prepared;
    prepared.instance_id = inst.instance_id;
    prepared.target = inst.target;
    prepared.depth = inst.depth;
    prepared.gold = inst.label;
    const encoding::EncoderInput input =
        encoding::build_encoder_input(texts, encoder.max_length());
    prepared.H = encoding::encode_utterances(input, encoder);
    prepared.path_length = prepared.H.rows();
    prepared.graph = glan::CommentGraph::chain(static_cast<int>(prepared.path_length));
    auto cached = target_cache.find(inst.target);
    if (cached == target_cache.end()) {
      cached = target_cache.emplace(inst.target,
                                    encoding::encode_target(inst.target, encoder))
                   .first;
    }
    prepared.target_vec = cached->second;
    out.instances.push_back(std::move(prepared));
  }
  return out;
}

AdamOptimizer::AdamOptimizer(int hidden_size, double beta1, double beta2,
                             double epsilon)
    : m_(glan::GlanParams::zeros(hidden_size)),
      v_(glan::GlanParams::zeros(hidden_size)),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon) {}

void AdamOptimizer::step(glan::GlanParams& params, const glan::GlanParams& grads,
                         double lr, bool head_only) {
  ++t_;
  const double correction =
      std::sqrt(1.0 - std::pow(beta2_, t_)) / (1.0 - std::pow(beta1_, t_));
  const double lr_t = lr * correction;

  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = m_.tensors();
  auto v = v_.tensors();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].size() != g[k].size()) {
      throw ContractViolation("gradient tensor " + g[k].name +
                              " does not match the parameter shape");
    }
    if (head_only && p[k].name.rfind("head.", 0) != 0) continue;
    for (long i = 0; i < p[k].size(); ++i) {
      const double grad = g[k].data[i];
      m[k].data[i] = beta1_ * m[k].data[i] + (1.0 - beta1_) * grad;
      v[k].data[i] = beta2_ * v[k].data[i] + (1.0 - beta2_) * grad * grad;
      p[k].data[i] -= lr_t * m[k].data[i] / (std::sqrt(v[k].data[i]) + epsilon_);
    }
  }
}

namespace {

constexpr char kBase64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += kBase64Alphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = bytes[i] << 16;
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kBase64Alphabet[(v >> 18) & 63];
    out += kBase64Alphabet[(v >> 12) & 63];
    out += kBase64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  throw ParseError("invalid base64 character in checkpoint tensor data");
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) {
    throw ParseError("base64 tensor data length must be a multiple of 4");
  }
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool pad1 = text[i + 2] == '=';
    const bool pad2 = text[i + 3] == '=';
    const unsigned v = (base64_value(text[i]) << 18) |
                       (base64_value(text[i + 1]) << 12) |
                       (pad1 ? 0 : base64_value(text[i + 2]) << 6) |
                       (pad2 ? 0 : base64_value(text[i + 3]));
    out.push_back((v >> 16) & 0xff);
    if (!pad1) out.push_back((v >> 8) & 0xff);
    if (!pad2) out.push_back(v & 0xff);
  }
  return out;
}

// Doubles as explicit little-endian byte streams, so checkpoints are
// byte-identical across platforms.
std::string encode_doubles(const double* data, long count) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<std::size_t>(count) * 8);
  for (long i = 0; i < count; ++i) {
    const auto u = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) bytes.push_back((u >> (8 * b)) & 0xff);
  }
  return base64_encode(bytes);
}

void decode_doubles(const std::string& b64, double* data, long count) {
  const std::vector<unsigned char> bytes = base64_decode(b64);
  if (bytes.size() != static_cast<std::size_t>(count) * 8) {
    throw ParseError("checkpoint tensor data has the wrong byte count");
  }
  for (long i = 0; i < count; ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) {
      u |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i) * 8 + b])
           << (8 * b);
    }
    data[i] = std::bit_cast<double>(u);
  }
}

double mean_loss_or_abort(double loss_sum, long count, int epoch) {
  const double mean = loss_sum / static_cast<double>(count);
  if (!std::isfinite(mean)) {
    throw Error("training diverged: non-finite loss in epoch " +
                std::to_string(epoch));
  }
  return mean;
}

}  // namespace

TrainResult train(const TrainConfig& config, const glan::GlanConfig& model_config,
                  const Dataset& train_set, const Dataset& val_set,
                  const std::map<std::string, std::string>& config_snapshot,
                  std::ostream* log_stream) {
  config.validate();
  model_config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty");

  Rng init_rng(Rng::derive(config.seed, "init"));
  glan::GlanModel model(model_config,
                        glan::GlanParams::init(model_config.hidden_size, init_rng));
  AdamOptimizer optimizer(model_config.hidden_size);
  glan::GlanParams grads = glan::GlanParams::zeros(model_config.hidden_size);

  TrainResult result;
  result.checkpoint.config = config_snapshot;
  result.checkpoint.model = model_config;
  result.checkpoint.params = model.params();
  result.checkpoint.epoch = 0;
  double best_f = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;

  const long n = static_cast<long>(train_set.size());
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng epoch_rng(Rng::derive(config.seed, "epoch-" + std::to_string(epoch)));
    std::vector<long> order(n);
    std::iota(order.begin(), order.end(), 0);
    epoch_rng.shuffle(order);
    // Group similar path lengths into the same batch; the shuffle above
    // still randomizes membership among equal lengths.
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) {
      return train_set.instances[a].path_length < train_set.instances[b].path_length;
    });
    std::vector<std::vector<long>> batches;
    for (long start = 0; start < n; start += config.batch_size) {
      const long end = std::min(n, start + config.batch_size);
      batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    epoch_rng.shuffle(batches);

    double loss_sum = 0.0;
    for (const std::vector<long>& batch : batches) {
      grads.set_zero();
      double batch_loss = 0.0;
      for (long idx : batch) {
        const PreparedInstance& inst = train_set.instances[idx];
        batch_loss += model.forward_backward(inst.H, inst.graph, inst.target_vec,
                                             inst.gold, grads);
      }
      if (!std::isfinite(batch_loss)) {
        throw Error("training diverged: non-finite loss in epoch " +
                    std::to_string(epoch));
      }
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (auto& t : grads.tensors()) {
        for (long i = 0; i < t.size(); ++i) t.data[i] *= scale;
      }
      optimizer.step(model.params(), grads, config.lr_head, config.head_only);
      loss_sum += batch_loss;
    }

    EpochLogEntry entry;
    entry.epoch = epoch;
    entry.train_loss = mean_loss_or_abort(loss_sum, n, epoch);
    entry.val_f_avg = evaluate(model, val_set).pooled.f_avg;
    result.log.push_back(entry);
    if (log_stream) {
      json line;
      line["epoch"] = entry.epoch;
      line["train_loss"] = entry.train_loss;
      line["val_f_avg"] = entry.val_f_avg;
      (*log_stream) << line.dump() << "\n";
    }

    if (entry.val_f_avg > best_f) {
      best_f = entry.val_f_avg;
      best_epoch = epoch;
      result.checkpoint.params = model.params();
      result.checkpoint.epoch = epoch;
      result.checkpoint.best_val_f_avg = best_f;
    }
    if (config.patience > 0 && epoch - best_epoch >= config.patience) break;
  }
  return result;
}

evaluation::MetricsReport evaluate(const glan::GlanModel& model, const Dataset& data) {
  if (data.empty()) throw ConfigError("cannot evaluate an empty instance set");
  std::vector<evaluation::LabeledPrediction> predictions;
  predictions.reserve(data.size());
  for (const PreparedInstance& inst : data.instances) {
    const glan::StancePrediction pred =
        model.predict(inst.H, inst.graph, inst.target_vec);
    predictions.push_back({inst.target, inst.depth, inst.gold, pred.label});
  }
  return evaluation::report_from_predictions(predictions);
}

evaluation::MetricsReport evaluate(const Checkpoint& checkpoint,
                                   const std::vector<corpus::StanceInstance>& instances,
                                   const std::vector<corpus::ConversationThread>& threads,
                                   const encoding::ContextualEncoder& encoder) {
  if (instances.empty()) throw ConfigError("cannot evaluate an empty instance set");
  const Dataset data =
      prepare_dataset(instances, threads, encoder, checkpoint_setting(checkpoint));
  return evaluate(model_from_checkpoint(checkpoint), data);
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  json doc;
  doc["format"] = "stance-checkpoint/1";
  doc["config"] = checkpoint.config;
  json model;
  model["hidden_size"] = checkpoint.model.hidden_size;
  model["lambda"] = checkpoint.model.residual_scale;
  model["hops"] = checkpoint.model.hops;
  model["gcn_nonlinearity"] = glan::to_string(checkpoint.model.gcn_activation);
  model["conv_nonlinearity"] = glan::to_string(checkpoint.model.conv_activation);
  model["gcn_normalize"] = checkpoint.model.normalize_adjacency;
  model["use_global"] = checkpoint.model.use_global;
  model["use_local"] = checkpoint.model.use_local;
  model["use_structural"] = checkpoint.model.use_structural;
  model["use_target_attention"] = checkpoint.model.use_target_attention;
  doc["model"] = model;
  doc["epoch"] = checkpoint.epoch;
  doc["best_val_f_avg"] = checkpoint.best_val_f_avg;

  json tensors;
  for (const auto& t : checkpoint.params.tensors()) {
    json entry;
    entry["shape"] = {t.rows, t.cols};
    entry["data"] = encode_doubles(t.data, t.size());
    tensors[t.name] = entry;
  }
  doc["tensors"] = tensors;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint file: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw Error("failed while writing checkpoint file: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint file: " + path);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError("checkpoint file is not valid JSON: " + path);
  if (doc.value("format", "") != std::string("stance-checkpoint/1")) {
    throw ParseError("unrecognized checkpoint format in " + path);
  }
  Checkpoint cp;
  try {
    cp.config = doc.at("config").get<std::map<std::string, std::string>>();
    const json& model = doc.at("model");
    cp.model.hidden_size = model.at("hidden_size").get<int>();
    cp.model.residual_scale = model.at("lambda").get<double>();
    cp.model.hops = model.at("hops").get<int>();
    cp.model.gcn_activation =
        glan::activation_from_string(model.at("gcn_nonlinearity").get<std::string>());
    cp.model.conv_activation =
        glan::activation_from_string(model.at("conv_nonlinearity").get<std::string>());
    cp.model.normalize_adjacency = model.at("gcn_normalize").get<bool>();
    cp.model.use_global = model.at("use_global").get<bool>();
    cp.model.use_local = model.at("use_local").get<bool>();
    cp.model.use_structural = model.at("use_structural").get<bool>();
    cp.model.use_target_attention = model.at("use_target_attention").get<bool>();
    cp.epoch = doc.at("epoch").get<int>();
    cp.best_val_f_avg = doc.at("best_val_f_avg").get<double>();

    cp.params = glan::GlanParams::zeros(cp.model.hidden_size);
    const json& tensors = doc.at("tensors");
    for (auto& t : cp.params.tensors()) {
      if (!tensors.contains(t.name)) {
        throw ParseError("checkpoint is missing tensor '" + t.name + "'");
      }
      const json& entry = tensors.at(t.name);
      const auto shape = entry.at("shape").get<std::vector<long>>();
      if (shape.size() != 2 || shape[0] != t.rows || shape[1] != t.cols) {
        throw ParseError("checkpoint tensor '" + t.name + "' has the wrong shape");
      }
      decode_doubles(entry.at("data").get<std::string>(), t.data, t.size());
    }
  } catch (const json::exception& e) {
    throw ParseError("malformed checkpoint " + path + ": " + e.what());
  }
  return cp;
}

glan::GlanModel model_from_checkpoint(const Checkpoint& checkpoint) {
  return glan::GlanModel(checkpoint.model, checkpoint.params);
}

Setting checkpoint_setting(const Checkpoint& checkpoint) {
  auto it = checkpoint.config.find("train.setting");
  if (it == checkpoint.config.end()) return Setting::WithHistory;
  return setting_from_string(it->second);
}

}  // namespace stance::training
