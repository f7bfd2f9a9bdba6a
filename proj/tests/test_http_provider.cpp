#include <atomic>
#include <cstdlib>
#include <thread>

#include "vendor/doctest.h"
#include "vendor/httplib.h"
#include "vendor/json.hpp"

#include "icuflow/http_provider.hpp"

using namespace icuflow;

namespace {

// One local chat-completions endpoint per fixture, scripted per test.
struct LocalServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  explicit LocalServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this]() { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~LocalServer() {
    server.stop();
    thread.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

HttpProvider make_client(const LocalServer& server) {
  setenv("ICUFLOW_TEST_KEY", "test-key-123", 1);
  HttpProviderOptions options;
  options.base_url = server.base_url();
  options.api_key_env = "ICUFLOW_TEST_KEY";
  options.timeout = std::chrono::seconds(5);
  return HttpProvider(options);
}

ProviderRequest sample_request() {
  ProviderRequest request;
  request.model_id = "test-model";
  request.system_text = "You are the prediction agent.";
  request.user_text = "DEMOGRAPHICS\nage: 61; sex: Male";
  request.max_output_tokens = 256;
  request.temperature = 0.25;
  return request;
}

std::string completion_body(const std::string& content) {
  nlohmann::json doc;
  doc["choices"] = {{{"message", {{"role", "assistant"}, {"content", content}}}}};
  return doc.dump();
}

}  // namespace

TEST_CASE("a successful call carries the chat payload both ways") {
  nlohmann::json seen;
  std::string auth_header;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth_header = req.get_header_value("Authorization");
    res.set_content(completion_body("predicted outcome text"), "application/json");
  });

  auto client = make_client(server);
  const auto request = sample_request();
  const auto response = client.complete(request);

  CHECK(response.text == "predicted outcome text");
  CHECK(response.attempts_used == 1);
  CHECK(response.input_token_estimate ==
        token_estimate(request.system_text) + token_estimate(request.user_text));
  CHECK(response.output_token_estimate == token_estimate(response.text));

  CHECK(auth_header == "Bearer test-key-123");
  CHECK(seen.at("model") == "test-model");
  CHECK(seen.at("max_tokens") == 256);
  CHECK(seen.at("temperature") == 0.25);
  REQUIRE(seen.at("messages").size() == 2);
  CHECK(seen.at("messages")[0].at("role") == "system");
  CHECK(seen.at("messages")[0].at("content") == request.system_text);
  CHECK(seen.at("messages")[1].at("role") == "user");
  CHECK(seen.at("messages")[1].at("content") == request.user_text);
}

TEST_CASE("rate limiting is transient and retried to success") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    res.set_content(completion_body("eventually fine"), "application/json");
  });

  auto client = make_client(server);
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.base_backoff = std::chrono::milliseconds(1);
  const auto response = with_retries(client, sample_request(), policy);
  CHECK(response.text == "eventually fine");
  CHECK(response.attempts_used == 3);
  CHECK(hits.load() == 3);
}

TEST_CASE("authentication failures are fatal") {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content("no", "text/plain");
  });
  auto client = make_client(server);
  try {
    client.complete(sample_request());
    FAIL("expected ProviderError");
  } catch (const ProviderError& err) {
    CHECK(err.error_class() == ErrorClass::fatal);
  }
}

TEST_CASE("server errors are transient") {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("down", "text/plain");
  });
  auto client = make_client(server);
  try {
    client.complete(sample_request());
    FAIL("expected ProviderError");
  } catch (const ProviderError& err) {
    CHECK(err.error_class() == ErrorClass::transient);
  }
}

TEST_CASE("unexpected statuses and broken payloads are fatal") {
  int mode = 0;
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (mode == 0) {
      res.status = 418;
      res.set_content("teapot", "text/plain");
    } else if (mode == 1) {
      res.set_content("this is not json", "application/json");
    } else {
      res.set_content(R"({"choices": []})", "application/json");
    }
  });
  auto client = make_client(server);
  for (mode = 0; mode <= 2; ++mode) {
    try {
      client.complete(sample_request());
      FAIL("expected ProviderError for mode ", mode);
    } catch (const ProviderError& err) {
      CHECK(err.error_class() == ErrorClass::fatal);
    }
  }
}

TEST_CASE("an unreachable backend is a transient failure") {
  setenv("ICUFLOW_TEST_KEY", "test-key-123", 1);
  HttpProviderOptions options;
  options.base_url = "http://127.0.0.1:9/v1";  // discard port, nothing listens
  options.api_key_env = "ICUFLOW_TEST_KEY";
  options.timeout = std::chrono::seconds(1);
  HttpProvider client(options);
  try {
    client.complete(sample_request());
    FAIL("expected ProviderError");
  } catch (const ProviderError& err) {
    CHECK(err.error_class() == ErrorClass::transient);
  }
}

TEST_CASE("a missing key variable fails construction by name") {
  unsetenv("ICUFLOW_TEST_MISSING_KEY");
  HttpProviderOptions options;
  options.api_key_env = "ICUFLOW_TEST_MISSING_KEY";
  try {
    HttpProvider client(options);
    FAIL("expected ConfigError");
  } catch (const ConfigError& err) {
    CHECK(std::string(err.what()).find("ICUFLOW_TEST_MISSING_KEY") != std::string::npos);
  }
}

TEST_CASE("the key can be optional for unauthenticated endpoints") {
  unsetenv("ICUFLOW_TEST_MISSING_KEY");
  std::string auth_header = "unset";
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth_header = req.get_header_value("Authorization");
    res.set_content(completion_body("open access"), "application/json");
  });

  HttpProviderOptions options;
  options.base_url = server.base_url();
  options.api_key_env = "ICUFLOW_TEST_MISSING_KEY";
  options.require_api_key = false;
  HttpProvider client(options);
  CHECK(client.complete(sample_request()).text == "open access");
  CHECK(auth_header.empty());
}
