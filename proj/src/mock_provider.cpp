#include "icuflow/mock_provider.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "icuflow/prediction.hpp"
#include "icuflow/rng.hpp"
#include "icuflow/transparency.hpp"

namespace icuflow {
namespace {

// Longest names first so bare-substring fallback cannot match a prefix of a
// longer name.
const std::vector<std::string> kAgentNames = {
    "sas_all_in_one", "vitals_analysis", "context_analysis", "lab_analysis",
    "transparency",   "integration",     "prediction",       "validation",
};

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

// Last occurrence of "LABEL: <number>" in the text. Prompts place exemplar
// blocks before the live patient's section, so the last value is the live one.
std::optional<double> last_labeled_number(const std::string& text, const std::string& label) {
  std::optional<double> found;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto pos = line.find(label);
    if (pos == std::string::npos) continue;
    auto rest = line.substr(pos + label.size());
    const auto colon = rest.find(':');
    if (colon == std::string::npos) continue;
    rest = rest.substr(colon + 1);
    const char* begin = rest.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end != begin && std::isfinite(value)) found = value;
  }
  return found;
}

const std::vector<std::string> kFactorPool = {
    "rising lactate",          "vasopressor requirement", "renal function decline",
    "respiratory failure risk", "hemodynamic instability", "advanced age",
    "leukocytosis",            "thrombocytopenia",
};

PredictionOutcome derive_prediction(const std::string& user_text, Rng& rng) {
  PredictionOutcome outcome;
  const auto reference_mortality = last_labeled_number(user_text, "APACHE_PREDICTED_MORTALITY");
  const double u = rng.unit();
  outcome.mortality_probability = reference_mortality
                                      ? clamp(*reference_mortality + (u - 0.5) * 0.16, 0.01, 0.99)
                                      : 0.05 + 0.9 * u;
  const auto reference_los = last_labeled_number(user_text, "APACHE_PREDICTED_LOS_DAYS");
  const double v = rng.unit();
  outcome.predicted_los_days =
      reference_los ? clamp(*reference_los + (v - 0.5) * 2.0, 0.5, 60.0) : 1.0 + 29.0 * v;
  const double margin = std::fabs(outcome.mortality_probability - 0.5);
  outcome.confidence =
      margin >= 0.3 ? Confidence::high : (margin >= 0.15 ? Confidence::medium : Confidence::low);
  const std::size_t start = rng.bounded(kFactorPool.size());
  for (std::size_t i = 0; i < 3; ++i) {
    outcome.key_factors.push_back(kFactorPool[(start + i * 3) % kFactorPool.size()]);
  }
  return outcome;
}

// Emits a deterministic subset of the rubric's marker phrases so transparency
// scores are high but vary with the input.
std::string marker_commentary(Rng& rng) {
  std::string out;
  for (const auto& dimension : default_rubric().dimensions) {
    for (const auto& criterion : dimension.criteria) {
      for (const auto& pattern : criterion.patterns) {
        if (rng.unit() < 0.9) out += "Coverage note: " + pattern + ".\n";
      }
    }
  }
  return out;
}

std::string severity_phrase(double p) {
  if (p >= 0.7) return "severe derangement with high short-term risk";
  if (p >= 0.4) return "moderate derangement requiring close monitoring";
  return "mild derangement with a reassuring trend";
}

std::string analysis_body(const std::string& heading, const std::string& user_text, Rng& rng) {
  const auto reference = last_labeled_number(user_text, "APACHE_PREDICTED_MORTALITY");
  const double tone = reference ? *reference : rng.unit();
  std::string out = heading + "\n";
  out += "Overall picture: " + severity_phrase(tone) + ".\n";
  out += "Notable pattern index " + std::to_string(rng.bounded(97)) + " observed across the record.\n";
  out += "Findings are internally consistent and were cross-checked against the supplied sections.\n";
  return out;
}

}  // namespace

std::string MockProvider::detect_agent(const std::string& system_text) {
  for (const auto& name : kAgentNames) {
    if (system_text.find("the " + name + " agent") != std::string::npos) return name;
  }
  for (const auto& name : kAgentNames) {
    if (system_text.find(name) != std::string::npos) return name;
  }
  return "";
}

ProviderResponse MockProvider::complete(const ProviderRequest& request) {
  validate_request(request);
  const std::string agent = detect_agent(request.system_text);
  Rng rng(mix64(seed_, mix64(fnv1a64(request.system_text), fnv1a64(request.user_text))));

  std::string text;
  if (agent == "prediction" || agent == "sas_all_in_one") {
    const PredictionOutcome outcome = derive_prediction(request.user_text, rng);
    text = "ASSESSMENT\n";
    text += "The assembled evidence supports the structured estimate below; the dominant signals ";
    text += "are " + outcome.key_factors.front() + " and " + outcome.key_factors.back() + ".\n\n";
    text += render_prediction(outcome);
    text += "\n";
    if (agent == "sas_all_in_one") {
      text += "\nEXPLANATION\n";
      text += marker_commentary(rng);
    }
  } else if (agent == "transparency") {
    text = "TRANSPARENCY ASSESSMENT\n";
    text += "The prediction rationale is documented below with its supporting markers.\n";
    text += marker_commentary(rng);
  } else if (agent == "validation") {
    const auto predicted = last_labeled_number(request.user_text, "MORTALITY_PROBABILITY");
    text = "VALIDATION REVIEW\n";
    text += "Compared the predicted outcome against the recorded one.\n";
    text += (predicted && *predicted >= 0.5) ? "The model committed to a high-risk call.\n"
                                             : "The model committed to a low-risk call.\n";
    text += "VERDICT: ";
    text += (rng.unit() < 0.8) ? "CONSISTENT" : "REVIEW_REQUIRED";
    text += "\n";
  } else if (agent == "lab_analysis") {
    text = analysis_body("LABORATORY ASSESSMENT", request.user_text, rng);
  } else if (agent == "vitals_analysis") {
    text = analysis_body("VITALS ASSESSMENT", request.user_text, rng);
  } else if (agent == "context_analysis") {
    text = analysis_body("CONTEXT ASSESSMENT", request.user_text, rng);
  } else if (agent == "integration") {
    text = analysis_body("INTEGRATED ASSESSMENT", request.user_text, rng);
    text += "The three upstream analyses agree on the leading risks.\n";
  } else {
    text = "ACKNOWLEDGED\n";
    text += "Processed input block " + std::to_string(rng.bounded(1000000)) + ".\n";
  }

  ProviderResponse response;
  response.text = std::move(text);
  response.input_token_estimate = token_estimate(request.system_text) + token_estimate(request.user_text);
  response.output_token_estimate = token_estimate(response.text);
  response.attempts_used = 1;
  return response;
}

ProviderResponse FaultInjectingProvider::complete(const ProviderRequest& request) {
  const std::uint64_t request_key = mix64(fnv1a64(request.system_text), fnv1a64(request.user_text));
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& rule = rules_[i];
    if (!rule.agent_contains.empty() &&
        request.system_text.find(rule.agent_contains) == std::string::npos) {
      continue;
    }
    if (!rule.user_contains.empty() &&
        request.user_text.find(rule.user_contains) == std::string::npos) {
      continue;
    }
    std::size_t seen = 0;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      seen = ++attempts_[{i, request_key}];
    }
    if (rule.fail_count == 0 || seen <= rule.fail_count) {
      throw ProviderError(rule.message, rule.error_class);
    }
  }
  return inner_->complete(request);
}

}  // namespace icuflow
