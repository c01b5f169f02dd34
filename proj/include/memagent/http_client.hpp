#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "memagent/errors.hpp"

namespace memagent {

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Minimal JSON-over-HTTP POST transport used by the external providers.
// Implementations must be callable from several threads at once.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;

  // Throws ProviderError on connection failure, timeout, or non-2xx status.
  virtual HttpResponse post_json(const std::string& json_body, std::chrono::milliseconds timeout) = 0;

  // True when something answers at the endpoint's host:port.
  virtual bool reachable(std::chrono::milliseconds timeout) = 0;
};

// `endpoint` is a full URL such as "http://127.0.0.1:9000/v1/caption".
std::shared_ptr<HttpTransport> make_http_transport(const std::string& endpoint);

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{5000};
};

// Runs `fn` up to max_retries + 1 times with exponential backoff between
// attempts. Only ProviderError is retried; the last one is rethrown.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, std::string_view description, Fn&& fn) -> decltype(fn()) {
  auto backoff = policy.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const ProviderError& e) {
      if (attempt >= policy.max_retries) {
        throw ProviderError(std::string(description) + " failed after " + std::to_string(attempt + 1) +
                                " attempt(s): " + e.what(),
                            e.frame());
      }
    }
    std::this_thread::sleep_for(backoff);
    backoff = std::min(policy.max_backoff,
                       std::chrono::milliseconds(static_cast<long long>(backoff.count() * policy.multiplier)));
  }
}

std::string base64_encode(std::string_view bytes);

}  // namespace memagent
