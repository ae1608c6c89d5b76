#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace geoicl {

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 100;
  double backoff_multiplier = 2.0;
  int timeout_sec = 30;
};

// POSTs a JSON body and parses a JSON response. Retries transient failures
// (connection errors, 5xx) with exponential backoff; throws ClientUnavailable
// once attempts are exhausted and BackendUnavailable on non-retriable status.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body,
                         const RetryPolicy& policy = {});

}  // namespace geoicl
