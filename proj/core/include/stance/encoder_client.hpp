#pragma once

#include <string>
#include <vector>

#include "stance/encoding.hpp"

namespace stance::encoding {

// Adapter to a pretrained contextual encoder served over HTTP. The heavy
// model runs behind the endpoint; this client sends the token sequence and
// receives one vector per token:
//
//   POST <endpoint>/encode
//   request  {"tokens": ["...", ...]}
//   response {"vectors": [[f64 x hidden], ...]}
//
// The served model decides how to contextualize (and how to handle its own
// subword vocabulary); the contract here is only tokens-in, vectors-out.
class PretrainedEncoderClient final : public ContextualEncoder {
 public:
  PretrainedEncoderClient(std::string endpoint, int hidden_size, int max_length,
                          int timeout_seconds = 30);

  int hidden_size() const override { return hidden_size_; }
  int max_length() const override { return max_length_; }
  Eigen::MatrixXd encode(const std::vector<std::string>& tokens) const override;

 private:
  std::string endpoint_;
  int hidden_size_;
  int max_length_;
  int timeout_seconds_;
};

}  // namespace stance::encoding
