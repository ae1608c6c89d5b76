#include "geoicl/http.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>

#include "geoicl/types.hpp"

namespace geoicl {

using nlohmann::json;

json post_json(const std::string& base_url, const std::string& path,
               const json& body, const RetryPolicy& policy) {
  httplib::Client client(base_url);
  client.set_connection_timeout(policy.timeout_sec, 0);
  client.set_read_timeout(policy.timeout_sec, 0);

  const std::string payload = body.dump();
  int backoff_ms = policy.initial_backoff_ms;
  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, policy.max_attempts); ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms = static_cast<int>(backoff_ms * policy.backoff_multiplier);
    }
    auto res = client.Post(path, payload, "application/json");
    if (!res) {
      last_error = "connection failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {  // transient server error
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error("BackendUnavailable",
                  base_url + path + " returned HTTP " +
                      std::to_string(res->status));
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error("BackendUnavailable",
                  std::string("invalid JSON from backend: ") + e.what());
    }
  }
  throw Error("ClientUnavailable", base_url + path + ": " + last_error);
}

}  // namespace geoicl
