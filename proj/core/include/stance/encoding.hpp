#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "stance/config.hpp"

namespace stance::encoding {

inline constexpr const char* kSeparatorToken = "[SEP]";

// Token sequence for one conversation path. Consecutive utterances are
// separated by kSeparatorToken; spans index the non-separator tokens of each
// kept utterance, in path order.
struct EncoderInput {
  struct Span {
    int begin = 0;  // inclusive token index
    int end = 0;    // exclusive
    int size() const { return end - begin; }
  };
  std::vector<std::string> tokens;
  std::vector<Span> spans;
};

// Produces one vector per input token. Implementations must be deterministic
// in inference mode and safe to share across threads after construction.
class ContextualEncoder {
 public:
  virtual ~ContextualEncoder() = default;
  virtual int hidden_size() const = 0;
  virtual int max_length() const = 0;
  // Returns a tokens.size() x hidden_size matrix, row i for token i.
  virtual Eigen::MatrixXd encode(const std::vector<std::string>& tokens) const = 0;
};

// Deterministic per-token embedder: token string -> seeded pseudo-random
// unit vector, independent of context. Keeps the downstream math testable
// without model weights.
class HashedEncoder final : public ContextualEncoder {
 public:
  HashedEncoder(int hidden_size, int max_length, std::uint64_t seed);

  int hidden_size() const override { return hidden_size_; }
  int max_length() const override { return max_length_; }
  Eigen::MatrixXd encode(const std::vector<std::string>& tokens) const override;

  Eigen::VectorXd token_vector(std::string_view token) const;

 private:
  int hidden_size_;
  int max_length_;
  std::uint64_t seed_;
};

// Tokenizes each utterance, joins them with separator tokens, and applies
// the truncation policy: whole utterances are dropped oldest-first until the
// sequence fits max_length; the final utterance is never dropped, and if it
// alone exceeds max_length its head is cut.
EncoderInput build_encoder_input(const std::vector<std::string>& utterance_texts,
                                 int max_length);

// Sentence matrix H: row i = mean of the token vectors inside span i.
// Separator tokens are excluded from every mean.
Eigen::MatrixXd encode_utterances(const EncoderInput& input,
                                  const ContextualEncoder& encoder);

// Mean of the token vectors of the target string encoded standalone.
Eigen::VectorXd encode_target(const std::string& target,
                              const ContextualEncoder& encoder);

// Encoder factory driven by config keys encoder.kind, encoder.hidden_size,
// encoder.max_length, encoder.seed (hashed) and encoder.endpoint (pretrained).
std::unique_ptr<ContextualEncoder> make_encoder(const Config& config);

}  // namespace stance::encoding
