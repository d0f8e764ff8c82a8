#include "stance/encoding.hpp"

#include <cmath>

#include "stance/encoder_client.hpp"
#include "stance/errors.hpp"
#include "stance/text.hpp"

namespace stance::encoding {

namespace {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

HashedEncoder::HashedEncoder(int hidden_size, int max_length, std::uint64_t seed)
    : hidden_size_(hidden_size), max_length_(max_length), seed_(seed) {
  if (hidden_size <= 0) throw ConfigError("encoder.hidden_size must be positive");
  if (max_length <= 0) throw ConfigError("encoder.max_length must be positive");
}

Eigen::VectorXd HashedEncoder::token_vector(std::string_view token) const {
  std::uint64_t state = fnv1a(token, 0xcbf29ce484222325ull ^ seed_);
  Eigen::VectorXd v(hidden_size_);
  for (int i = 0; i < hidden_size_; ++i) {
    // Uniform in [-1, 1); sqrt-normalized below. Only IEEE-exact operations,
    // so the same token gives bit-identical vectors everywhere.
    double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    v[i] = 2.0 * u - 1.0;
  }
  double norm = v.norm();
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  return v / norm;
}

Eigen::MatrixXd HashedEncoder::encode(const std::vector<std::string>& tokens) const {
  Eigen::MatrixXd out(static_cast<int>(tokens.size()), hidden_size_);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.row(static_cast<int>(i)) = token_vector(tokens[i]).transpose();
  }
  return out;
}

EncoderInput build_encoder_input(const std::vector<std::string>& utterance_texts,
                                 int max_length) {
  if (utterance_texts.empty()) {
    throw ContractViolation("build_encoder_input: empty utterance path");
  }
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(utterance_texts.size());
  for (const auto& text : utterance_texts) {
    tokenized.push_back(split_whitespace(text));
    // A blank utterance still occupies a row downstream; stand in one empty
    // token so its span (and mean vector) stays well-defined.
    if (tokenized.back().empty()) tokenized.back().push_back("");
  }

  // Drop whole utterances oldest-first until the joined sequence fits.
  std::size_t first = 0;
  auto total_length = [&](std::size_t from) {
    std::size_t n = 0;
    for (std::size_t i = from; i < tokenized.size(); ++i) n += tokenized[i].size();
    n += tokenized.size() - from - 1;  // separators
    return n;
  };
  while (first + 1 < tokenized.size() &&
         total_length(first) > static_cast<std::size_t>(max_length)) {
    ++first;
  }

  // Head-truncate the final utterance when it alone does not fit.
  if (first + 1 == tokenized.size() &&
      tokenized.back().size() > static_cast<std::size_t>(max_length)) {
    auto& last = tokenized.back();
    last.erase(last.begin(),
               last.begin() + static_cast<long>(last.size()) - max_length);
  }

  EncoderInput input;
  for (std::size_t i = first; i < tokenized.size(); ++i) {
    if (i > first) input.tokens.emplace_back(kSeparatorToken);
    EncoderInput::Span span;
    span.begin = static_cast<int>(input.tokens.size());
    for (auto& tok : tokenized[i]) input.tokens.push_back(std::move(tok));
    span.end = static_cast<int>(input.tokens.size());
    input.spans.push_back(span);
  }
  return input;
}

Eigen::MatrixXd encode_utterances(const EncoderInput& input,
                                  const ContextualEncoder& encoder) {
  if (input.spans.empty()) {
    throw ContractViolation("encode_utterances: no utterance spans");
  }
  Eigen::MatrixXd token_vectors = encoder.encode(input.tokens);
  if (token_vectors.rows() != static_cast<long>(input.tokens.size())) {
    throw ContractViolation("encoder returned " + std::to_string(token_vectors.rows()) +
                            " vectors for " + std::to_string(input.tokens.size()) +
                            " tokens");
  }
  Eigen::MatrixXd H(static_cast<int>(input.spans.size()), encoder.hidden_size());
  for (std::size_t i = 0; i < input.spans.size(); ++i) {
    const auto& span = input.spans[i];
    if (span.size() <= 0) {
      throw ContractViolation("encode_utterances: empty span at index " +
                              std::to_string(i));
    }
    H.row(static_cast<int>(i)) =
        token_vectors.middleRows(span.begin, span.size()).colwise().mean();
  }
  return H;
}

Eigen::VectorXd encode_target(const std::string& target,
                              const ContextualEncoder& encoder) {
  std::vector<std::string> tokens = split_whitespace(target);
  if (tokens.empty()) {
    throw ContractViolation("encode_target: empty target string");
  }
  Eigen::MatrixXd vectors = encoder.encode(tokens);
  return vectors.colwise().mean().transpose();
}

std::unique_ptr<ContextualEncoder> make_encoder(const Config& config) {
  std::string kind = config.get_string("encoder.kind", "hashed");
  int hidden = static_cast<int>(config.get_int("encoder.hidden_size", 64));
  int max_len = static_cast<int>(config.get_int("encoder.max_length", 512));
  if (kind == "hashed") {
    std::uint64_t seed = config.get_seed("encoder.seed", 17);
    return std::make_unique<HashedEncoder>(hidden, max_len, seed);
  }
  if (kind == "pretrained") {
    std::string endpoint = config.require_string("encoder.endpoint");
    return std::make_unique<PretrainedEncoderClient>(endpoint, hidden, max_len);
  }
  throw ConfigError("encoder.kind must be 'hashed' or 'pretrained', got '" + kind +
                    "'");
}

}  // namespace stance::encoding
