#include "icuflow/http_provider.hpp"

#include <cstdlib>

#include "vendor/httplib.h"
#include "vendor/json.hpp"

namespace icuflow {
namespace {

struct SemaphoreGuard {
  std::counting_semaphore<256>& semaphore;
  explicit SemaphoreGuard(std::counting_semaphore<256>& s) : semaphore(s) { semaphore.acquire(); }
  ~SemaphoreGuard() { semaphore.release(); }
};

// Splits "https://host:443/v1" into scheme://host:port and the path prefix.
void split_base_url(const std::string& base_url, std::string& scheme_host_port, std::string& path_prefix) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("provider base URL must start with http:// or https:// (got '" + base_url + "')");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port = base_url;
    path_prefix.clear();
  } else {
    scheme_host_port = base_url.substr(0, path_start);
    path_prefix = base_url.substr(path_start);
  }
  while (!path_prefix.empty() && path_prefix.back() == '/') path_prefix.pop_back();
}

bool transient_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace

HttpProvider::HttpProvider(HttpProviderOptions options)
    : options_(std::move(options)), in_flight_(static_cast<std::ptrdiff_t>(options_.max_in_flight)) {
  if (options_.max_in_flight == 0 || options_.max_in_flight > 256) {
    throw ConfigError("max_in_flight must lie in [1, 256]");
  }
  split_base_url(options_.base_url, scheme_host_port_, path_prefix_);
  if (options_.require_api_key) {
    if (options_.api_key_env.empty()) {
      throw ConfigError("api_key_env is empty; name the environment variable holding the API key");
    }
    const char* key = std::getenv(options_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + options_.api_key_env +
                        " is not set; it must hold the API key");
    }
    api_key_ = key;
  }
}

ProviderResponse HttpProvider::complete(const ProviderRequest& request) {
  validate_request(request);

  nlohmann::ordered_json body;
  body["model"] = request.model_id;
  body["messages"] = nlohmann::ordered_json::array();
  if (!request.system_text.empty()) {
    body["messages"].push_back({{"role", "system"}, {"content", request.system_text}});
  }
  body["messages"].push_back({{"role", "user"}, {"content", request.user_text}});
  body["max_tokens"] = request.max_output_tokens;
  body["temperature"] = request.temperature;

  SemaphoreGuard guard(in_flight_);

  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const auto result =
      client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!result) {
    throw ProviderError("network error talking to " + scheme_host_port_ + ": " +
                            httplib::to_string(result.error()),
                        ErrorClass::transient);
  }
  if (result->status == 401 || result->status == 403) {
    throw ProviderError("authentication rejected (HTTP " + std::to_string(result->status) + ")",
                        ErrorClass::fatal);
  }
  if (transient_status(result->status)) {
    throw ProviderError("backend unavailable (HTTP " + std::to_string(result->status) + ")",
                        ErrorClass::transient);
  }
  if (result->status != 200) {
    throw ProviderError("backend rejected the request (HTTP " + std::to_string(result->status) + ")",
                        ErrorClass::fatal);
  }

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(result->body);
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("backend returned a payload that is not valid JSON", ErrorClass::fatal);
  }
  std::string text;
  try {
    text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw ProviderError("backend payload is missing choices[0].message.content", ErrorClass::fatal);
  }

  ProviderResponse response;
  response.text = std::move(text);
  response.input_token_estimate = token_estimate(request.system_text) + token_estimate(request.user_text);
  response.output_token_estimate = token_estimate(response.text);
  response.attempts_used = 1;
  return response;
}

}  // namespace icuflow
