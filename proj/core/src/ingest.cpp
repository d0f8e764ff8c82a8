#include "stance/ingest.hpp"

#include <algorithm>
#include <memory>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "stance/errors.hpp"

namespace stance::ingest {

using nlohmann::json;

namespace {

struct ParsedUrl {
  std::string host_port;
  std::string base_path;
};

ParsedUrl parse_url(const std::string& url) {
  std::string rest = url;
  auto scheme = rest.find("://");
  if (scheme != std::string::npos) rest = rest.substr(scheme + 3);
  auto slash = rest.find('/');
  ParsedUrl out;
  if (slash == std::string::npos) {
    out.host_port = rest;
  } else {
    out.host_port = rest.substr(0, slash);
    out.base_path = rest.substr(slash);
    if (!out.base_path.empty() && out.base_path.back() == '/') {
      out.base_path.pop_back();
    }
  }
  if (out.host_port.empty()) {
    throw ConfigError("ingest endpoint has no host: '" + url + "'");
  }
  return out;
}

std::string require_string_field(const json& obj, const char* field,
                                 const std::string& where) {
  if (!obj.contains(field) || !obj[field].is_string()) {
    throw ParseError("forum response: " + where + " is missing string field '" +
                     field + "'");
  }
  return obj[field].get<std::string>();
}

// Issues one GET with the retry policy and returns the parsed JSON body.
class ForumClient {
 public:
  ForumClient(const EndpointConfig& config, int* requests_made)
      : config_(config),
        url_(parse_url(config.base_url)),
        http_("http://" + url_.host_port),
        requests_made_(requests_made) {
    http_.set_connection_timeout(config.timeout_seconds, 0);
    http_.set_read_timeout(config.timeout_seconds, 0);
    if (!config.auth_token.empty()) {
      headers_.emplace("Authorization", "Bearer " + config.auth_token);
    }
    if (config.requests_per_minute > 0) {
      interval_ = std::chrono::milliseconds(60'000 / config.requests_per_minute);
    }
  }

  json get(const std::string& path) {
    int transient_failures = 0;
    int backoff_ms = std::max(1, config_.backoff_initial_ms);
    for (;;) {
      throttle();
      ++*requests_made_;
      auto res = http_.Get((url_.base_path + path).c_str(), headers_);

      if (res && res->status == 200) {
        json body = json::parse(res->body, nullptr, false);
        if (body.is_discarded()) {
          throw ParseError("forum response for '" + path + "' is not valid JSON");
        }
        return body;
      }
      if (res && (res->status == 401 || res->status == 403)) {
        throw AuthError("forum endpoint rejected credentials (HTTP " +
                        std::to_string(res->status) + ")");
      }
      if (res && res->status == 429) {
        // Rate limited: honor Retry-After when present, then try again.
        int wait_ms = backoff_ms;
        if (res->has_header("Retry-After")) {
          wait_ms = std::stoi(res->get_header_value("Retry-After")) * 1000;
        }
        if (++transient_failures > config_.max_retries) {
          throw NetworkError("forum endpoint kept rate-limiting '" + path + "'");
        }
        sleep(std::chrono::milliseconds(wait_ms));
        continue;
      }

      // Connection failure or server error: capped exponential backoff.
      if (++transient_failures > config_.max_retries) {
        const std::string reason =
            res ? "HTTP " + std::to_string(res->status) : "connection failure";
        throw NetworkError("forum request '" + path + "' failed after " +
                           std::to_string(config_.max_retries) + " retries (" +
                           reason + ")");
      }
      sleep(std::chrono::milliseconds(backoff_ms));
      backoff_ms = std::min(backoff_ms * 2, std::max(1, config_.backoff_cap_ms));
    }
  }

 private:
  void throttle() {
    if (interval_.count() == 0) return;
    if (first_request_) {
      first_request_ = false;
      return;
    }
    sleep(interval_);
  }

  void sleep(std::chrono::milliseconds d) {
    if (config_.sleep_fn) {
      config_.sleep_fn(d);
    } else {
      std::this_thread::sleep_for(d);
    }
  }

  const EndpointConfig& config_;
  ParsedUrl url_;
  httplib::Client http_;
  httplib::Headers headers_;
  std::chrono::milliseconds interval_{0};
  bool first_request_ = true;
  int* requests_made_;
};

corpus::ConversationThread assemble_thread(const json& post, const json& comments,
                                           const std::string& target) {
  const std::string post_id = require_string_field(post, "id", "post");
  std::vector<corpus::Utterance> utterances;
  corpus::Utterance root;
  root.id = post_id;
  root.author = require_string_field(post, "author", "post " + post_id);
  root.text = require_string_field(post, "text", "post " + post_id);
  utterances.push_back(std::move(root));

  if (!comments.is_array()) {
    throw ParseError("forum response: comments for post " + post_id +
                     " is not an array");
  }
  for (const json& c : comments) {
    const std::string where = "comment of post " + post_id;
    corpus::Utterance u;
    u.id = require_string_field(c, "id", where);
    u.author = require_string_field(c, "author", where);
    u.text = require_string_field(c, "text", where);
    u.parent_id = require_string_field(c, "parent_id", where);
    utterances.push_back(std::move(u));
  }
  return corpus::ConversationThread(post_id, target, std::move(utterances));
}

}  // namespace

IngestResult ingest_forum(const EndpointConfig& config, const std::string& target,
                          int page_limit) {
  if (target.empty()) throw ConfigError("ingest target must be non-empty");
  IngestResult result;
  ForumClient client(config, &result.requests_made);

  std::vector<json> posts;
  long page = 1;
  while (page_limit <= 0 || result.pages_fetched < page_limit) {
    const json body = client.get("/posts?target=" + httplib::detail::encode_url(target) +
                                 "&page=" + std::to_string(page));
    if (!body.contains("posts") || !body["posts"].is_array()) {
      throw ParseError("forum response: page " + std::to_string(page) +
                       " is missing the 'posts' array");
    }
    ++result.pages_fetched;
    for (const json& p : body["posts"]) posts.push_back(p);
    if (!body.contains("next_page") || body["next_page"].is_null()) break;
    if (!body["next_page"].is_number_integer()) {
      throw ParseError("forum response: 'next_page' must be an integer or null");
    }
    page = body["next_page"].get<long>();
  }

  for (const json& post : posts) {
    const std::string post_id = require_string_field(post, "id", "post");
    const json body = client.get("/posts/" + post_id + "/comments");
    if (!body.contains("comments")) {
      throw ParseError("forum response: post " + post_id +
                       " comments payload is missing 'comments'");
    }
    result.threads.push_back(assemble_thread(post, body["comments"], target));
  }
  return result;
}

}  // namespace stance::ingest
