#include "stance/encoder_client.hpp"

#include <httplib.h>
#include <json.hpp>

#include "stance/errors.hpp"

namespace stance::encoding {

using nlohmann::json;

namespace {

// Splits "http://host:port/base" into client target and path prefix.
struct ParsedEndpoint {
  std::string host_port;
  std::string base_path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  std::string rest = endpoint;
  auto scheme = rest.find("://");
  if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
  auto slash = rest.find('/');
  ParsedEndpoint out;
  if (slash == std::string::npos) {
    out.host_port = rest;
    out.base_path = "";
  } else {
    out.host_port = rest.substr(0, slash);
    out.base_path = rest.substr(slash);
    if (!out.base_path.empty() && out.base_path.back() == '/') {
      out.base_path.pop_back();
    }
  }
  if (out.host_port.empty()) {
    throw ConfigError("encoder.endpoint has no host: '" + endpoint + "'");
  }
  return out;
}

}  // namespace

PretrainedEncoderClient::PretrainedEncoderClient(std::string endpoint,
                                                 int hidden_size, int max_length,
                                                 int timeout_seconds)
    : endpoint_(std::move(endpoint)),
      hidden_size_(hidden_size),
      max_length_(max_length),
      timeout_seconds_(timeout_seconds) {
  if (hidden_size <= 0) throw ConfigError("encoder.hidden_size must be positive");
  if (max_length <= 0) throw ConfigError("encoder.max_length must be positive");
  parse_endpoint(endpoint_);
}

Eigen::MatrixXd PretrainedEncoderClient::encode(
    const std::vector<std::string>& tokens) const {
  ParsedEndpoint ep = parse_endpoint(endpoint_);
  httplib::Client client(("http://" + ep.host_port).c_str());
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);

  json request;
  request["tokens"] = tokens;
  auto res = client.Post((ep.base_path + "/encode").c_str(), request.dump(),
                         "application/json");
  if (!res) {
    throw NetworkError("encoder endpoint unreachable: " + endpoint_);
  }
  if (res->status == 401 || res->status == 403) {
    throw AuthError("encoder endpoint rejected credentials (HTTP " +
                    std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    throw NetworkError("encoder endpoint returned HTTP " +
                       std::to_string(res->status));
  }

  json body = json::parse(res->body, nullptr, false);
  if (body.is_discarded() || !body.contains("vectors") ||
      !body["vectors"].is_array()) {
    throw ParseError("encoder response: missing 'vectors' array");
  }
  const json& vectors = body["vectors"];
  if (vectors.size() != tokens.size()) {
    throw ContractViolation("encoder returned " + std::to_string(vectors.size()) +
                            " vectors for " + std::to_string(tokens.size()) +
                            " tokens");
  }
  Eigen::MatrixXd out(static_cast<int>(tokens.size()), hidden_size_);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const json& row = vectors[i];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(hidden_size_)) {
      throw ParseError("encoder response: vector " + std::to_string(i) +
                       " has wrong width");
    }
    for (int j = 0; j < hidden_size_; ++j) {
      out(static_cast<int>(i), j) = row[j].get<double>();
    }
  }
  return out;
}

}  // namespace stance::encoding
