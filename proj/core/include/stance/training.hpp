#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "stance/config.hpp"
#include "stance/corpus.hpp"
#include "stance/encoding.hpp"
#include "stance/evaluation.hpp"
#include "stance/glan.hpp"

namespace stance::training {

// sentence_only truncates every path to its final utterance; with_history
// keeps the full ancestor chain.
enum class Setting { SentenceOnly, WithHistory };

Setting setting_from_string(const std::string& name);
const std::string& to_string(Setting s);

struct TrainConfig {
  std::uint64_t seed = 1;
  int epochs = 10;
  int batch_size = 16;
  double lr_encoder = 2e-5;  // applies only when the encoder is trainable
  double lr_head = 1e-3;
  int patience = 0;  // 0 disables early stopping: all epochs run
  Setting setting = Setting::WithHistory;
  bool head_only = false;  // freeze everything except the classifier head

  // Reads seed, train.epochs, train.batch_size, train.lr_encoder,
  // train.lr_head, train.patience, train.setting, train.head_only.
  static TrainConfig from_config(const Config& config);
  void validate() const;
};

// One instance pre-encoded for the network: the sentence matrix, its reply
// graph, and the target vector. Pre-encoding once keeps epochs cheap and the
// run order independent of encoder latency.
struct PreparedInstance {
  std::string instance_id;
  std::string target;
  int depth = 1;  // original conversation depth, kept for bucket reports
  Stance gold = Stance::None;
  Eigen::MatrixXd H;
  glan::CommentGraph graph;
  Eigen::VectorXd target_vec;
  long path_length = 0;  // rows of H after the setting's truncation
};

struct Dataset {
  std::vector<PreparedInstance> instances;
  bool empty() const { return instances.empty(); }
  std::size_t size() const { return instances.size(); }
};

// Encodes every instance under the given setting. Instances must resolve in
// `threads` by thread_id.
Dataset prepare_dataset(const std::vector<corpus::StanceInstance>& instances,
                        const std::vector<corpus::ConversationThread>& threads,
                        const encoding::ContextualEncoder& encoder, Setting setting);

// Adam over the network tensors. The encoder learning rate is carried in the
// config for trainable encoders; the shipped encoders are frozen, so only
// the network tensors ever receive updates.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(int hidden_size, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);

  void step(glan::GlanParams& params, const glan::GlanParams& grads, double lr,
            bool head_only);

 private:
  glan::GlanParams m_, v_;
  double beta1_, beta2_, epsilon_;
  long t_ = 0;
};

struct EpochLogEntry {
  int epoch = 0;
  double train_loss = 0.0;
  double val_f_avg = 0.0;
};

struct Checkpoint {
  std::map<std::string, std::string> config;  // resolved run configuration
  glan::GlanConfig model;
  glan::GlanParams params;
  int epoch = 0;  // epoch that produced the snapshot (1-based)
  double best_val_f_avg = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLogEntry> log;
};

// Minimizes mean cross-entropy with Adam; deterministic given the seed.
// Batches group instances of similar path length; each epoch reshuffles
// deterministically. After each epoch the validation pooled F_avg decides
// the kept snapshot. Non-finite loss aborts. `config_snapshot` is stored in
// the checkpoint verbatim.
TrainResult train(const TrainConfig& config, const glan::GlanConfig& model_config,
                  const Dataset& train_set, const Dataset& val_set,
                  const std::map<std::string, std::string>& config_snapshot = {},
                  std::ostream* log_stream = nullptr);

// Scores a prepared dataset with a model.
evaluation::MetricsReport evaluate(const glan::GlanModel& model, const Dataset& data);

// Convenience: rebuild the model from a checkpoint, prepare the instances
// under the checkpoint's setting, and score them.
evaluation::MetricsReport evaluate(const Checkpoint& checkpoint,
                                   const std::vector<corpus::StanceInstance>& instances,
                                   const std::vector<corpus::ConversationThread>& threads,
                                   const encoding::ContextualEncoder& encoder);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

glan::GlanModel model_from_checkpoint(const Checkpoint& checkpoint);

Setting checkpoint_setting(const Checkpoint& checkpoint);

}  // namespace stance::training
