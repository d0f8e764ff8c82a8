#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "stance/corpus.hpp"

namespace stance::ingest {

// Connection and retry policy for one forum endpoint. The sleeper is
// injectable so tests can observe throttling without real delays.
struct EndpointConfig {
  std::string base_url;        // e.g. http://localhost:8080/api
  std::string auth_token;      // sent as a bearer token when non-empty
  int requests_per_minute = 0; // 0 disables throttling
  int max_retries = 3;         // transient-failure retries per request
  int backoff_initial_ms = 250;
  int backoff_cap_ms = 4000;
  int timeout_seconds = 30;
  std::function<void(std::chrono::milliseconds)> sleep_fn;  // default: real sleep
};

struct IngestResult {
  std::vector<corpus::ConversationThread> threads;
  int pages_fetched = 0;
  int requests_made = 0;  // HTTP requests issued, retries included
};

// Walks GET {base}/posts?target=..&page=.. following next_page, then fetches
// GET {base}/posts/<id>/comments for each post and assembles one thread per
// post. Rate-limit responses (429) wait and retry; connection failures and
// 5xx retry with capped exponential backoff up to max_retries before raising
// NetworkError; 401/403 raise AuthError immediately. page_limit <= 0 means
// every page.
IngestResult ingest_forum(const EndpointConfig& config, const std::string& target,
                          int page_limit);

}  // namespace stance::ingest
