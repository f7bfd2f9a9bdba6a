#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>

#include "icuflow/errors.hpp"

namespace icuflow {

struct ProviderRequest {
  std::string model_id;
  std::string system_text;
  std::string user_text;
  std::size_t max_output_tokens = 1024;
  double temperature = 0.0;
};

struct ProviderResponse {
  std::string text;
  std::size_t input_token_estimate = 0;
  std::size_t output_token_estimate = 0;
  std::size_t attempts_used = 1;
};

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds base_backoff{250};
  double backoff_multiplier = 2.0;
  std::set<ErrorClass> retryable_classes{ErrorClass::transient};
};

// Character-based token estimate: ceiling(chars / 4). Monotone in length and
// independent of any backend tokenizer.
inline std::size_t token_estimate(const std::string& text) {
  return (text.size() + 3) / 4;
}

// Throws ConfigError when request invariants do not hold.
void validate_request(const ProviderRequest& request);

class Provider {
 public:
  virtual ~Provider() = default;

  // Must be safe to call concurrently from many workers.
  virtual ProviderResponse complete(const ProviderRequest& request) = 0;

  virtual std::string name() const = 0;
};

// Calls provider.complete up to policy.max_attempts times, sleeping
// base_backoff * multiplier^(attempt-1) after each retryable failure.
// Non-retryable errors propagate immediately. The returned response and any
// propagated ProviderError carry the number of attempts actually made.
ProviderResponse with_retries(Provider& provider, const ProviderRequest& request, const RetryPolicy& policy);

}  // namespace icuflow
