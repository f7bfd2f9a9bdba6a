#include "icuflow/provider.hpp"

#include <cmath>
#include <thread>

namespace icuflow {

void validate_request(const ProviderRequest& request) {
  if (request.user_text.empty()) throw ConfigError("provider request user_text must be non-empty");
  if (request.max_output_tokens == 0) throw ConfigError("provider request max_output_tokens must be >= 1");
  if (!(request.temperature >= 0.0)) throw ConfigError("provider request temperature must be >= 0");
}

ProviderResponse with_retries(Provider& provider, const ProviderRequest& request, const RetryPolicy& policy) {
  if (policy.max_attempts == 0) throw ConfigError("retry policy max_attempts must be >= 1");
  if (policy.backoff_multiplier < 1.0) throw ConfigError("retry policy backoff_multiplier must be >= 1");
  validate_request(request);

  for (std::size_t attempt = 1;; ++attempt) {
    try {
      ProviderResponse response = provider.complete(request);
      response.attempts_used = attempt;
      return response;
    } catch (const ProviderError& err) {
      const bool retryable = policy.retryable_classes.count(err.error_class()) > 0;
      if (!retryable || attempt >= policy.max_attempts) {
        throw ProviderError(err.what(), err.error_class(), attempt);
      }
      const double scale = std::pow(policy.backoff_multiplier, static_cast<double>(attempt - 1));
      const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(policy.base_backoff * scale);
      if (wait.count() > 0) std::this_thread::sleep_for(wait);
    }
  }
}

}  // namespace icuflow
