#pragma once

#include <cstdint>
#include <memory>
#include <semaphore>
#include <string>

#include "icuflow/provider.hpp"

namespace icuflow {

struct HttpProviderOptions {
  std::string base_url = "https://api.openai.com/v1";
  // Name of the environment variable holding the API key. The key itself is
  // read once at construction and never written to logs or run records.
  std::string api_key_env = "OPENAI_API_KEY";
  bool require_api_key = true;
  std::size_t max_in_flight = 8;
  std::chrono::seconds timeout{60};
};

// Chat-completions wire client. Each complete() call sends exactly one HTTP
// request per attempt; concurrent calls are capped at max_in_flight.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options);

  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return "http"; }

 private:
  HttpProviderOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string api_key_;
  std::counting_semaphore<256> in_flight_;
};

}  // namespace icuflow
