#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "icuflow/provider.hpp"

namespace icuflow {

// Deterministic offline backend. Responses are a pure function of
// (constructor seed, request): the agent is recognized from its name embedded
// in the system text and that agent's output contract is filled with values
// derived from a seeded hash of the user text. Prediction responses track any
// reference mortality/LOS lines present in the prompt, so synthetic severity
// carries through to emitted probabilities.
class MockProvider : public Provider {
 public:
  explicit MockProvider(std::uint64_t seed) : seed_(seed) {}

  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return "mock"; }

  // Name recognized from the system text, or "" when none matches.
  static std::string detect_agent(const std::string& system_text);

 private:
  std::uint64_t seed_;
};

// Scripted failure schedule for resilience tests. A rule applies to requests
// whose system text contains agent_contains and whose user text contains
// user_contains (an empty string matches everything); fail_count is how many
// times each distinct request fails before passing through (0 = always fail).
struct FaultRule {
  std::string agent_contains;
  std::string user_contains;
  std::size_t fail_count = 0;
  ErrorClass error_class = ErrorClass::transient;
  std::string message = "injected fault";
};

class FaultInjectingProvider : public Provider {
 public:
  FaultInjectingProvider(std::shared_ptr<Provider> inner, std::vector<FaultRule> rules)
      : inner_(std::move(inner)), rules_(std::move(rules)) {}

  ProviderResponse complete(const ProviderRequest& request) override;
  std::string name() const override { return "fault(" + inner_->name() + ")"; }

 private:
  std::shared_ptr<Provider> inner_;
  std::vector<FaultRule> rules_;
  std::mutex mutex_;
  std::map<std::pair<std::size_t, std::uint64_t>, std::size_t> attempts_;
};

}  // namespace icuflow
