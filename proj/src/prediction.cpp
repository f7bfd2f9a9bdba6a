#include "icuflow/prediction.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <sstream>

#include "icuflow/errors.hpp"

namespace icuflow {
namespace {

constexpr const char* kProbabilityLabel = "MORTALITY_PROBABILITY";
constexpr const char* kLosLabel = "PREDICTED_LOS_DAYS";
constexpr const char* kConfidenceLabel = "CONFIDENCE";
constexpr const char* kFactorsLabel = "KEY_FACTORS";
constexpr double kMaxLosDays = 365.0;

std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

// Returns the value after "LABEL:" on the first line that starts with the
// label, or nullopt when no line carries it.
std::optional<std::string> first_labeled_value(const std::string& text, const std::string& label) {
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::string stripped = trim(line);
    if (stripped.compare(0, label.size(), label) != 0) continue;
    std::size_t pos = label.size();
    while (pos < stripped.size() && std::isspace(static_cast<unsigned char>(stripped[pos]))) ++pos;
    if (pos >= stripped.size() || stripped[pos] != ':') continue;
    return trim(stripped.substr(pos + 1));
  }
  return std::nullopt;
}

double parse_strict_number(const std::string& field, const std::string& value) {
  if (value.empty()) throw ParseFormatError(field + " has an empty value");
  const char* begin = value.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (end != begin + value.size()) {
    throw ParseFormatError(field + " value '" + value + "' is not a number");
  }
  if (!std::isfinite(parsed)) throw ParseFormatError(field + " value '" + value + "' is not finite");
  return parsed;
}

// Shortest representation that parses back to the same double, so a
// rendered outcome re-parses to identical field values.
std::string format_number(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

}  // namespace

std::string to_string(Confidence confidence) {
  switch (confidence) {
    case Confidence::low: return "LOW";
    case Confidence::medium: return "MEDIUM";
    case Confidence::high: return "HIGH";
  }
  throw ParseFormatError("unknown confidence level");
}

Confidence confidence_from_string(const std::string& text) {
  if (text == "LOW") return Confidence::low;
  if (text == "MEDIUM") return Confidence::medium;
  if (text == "HIGH") return Confidence::high;
  throw ParseFormatError("CONFIDENCE value '" + text + "' is not LOW, MEDIUM, or HIGH");
}

std::string render_prediction_contract() {
  return "MORTALITY_PROBABILITY: <0.00-1.00>\n"
         "PREDICTED_LOS_DAYS: <positive number>\n"
         "CONFIDENCE: <LOW|MEDIUM|HIGH>\n"
         "KEY_FACTORS: <factor; factor; ...>";
}

std::string render_prediction(const PredictionOutcome& outcome) {
  std::string factors;
  for (std::size_t i = 0; i < outcome.key_factors.size(); ++i) {
    if (i > 0) factors += "; ";
    factors += outcome.key_factors[i];
  }
  std::string out;
  out += std::string(kProbabilityLabel) + ": " + format_number(outcome.mortality_probability) + "\n";
  out += std::string(kLosLabel) + ": " + format_number(outcome.predicted_los_days) + "\n";
  out += std::string(kConfidenceLabel) + ": " + to_string(outcome.confidence) + "\n";
  out += std::string(kFactorsLabel) + ": " + factors;
  return out;
}

PredictionOutcome parse_prediction(const std::string& text) {
  PredictionOutcome outcome;
  outcome.raw_text = text;

  const auto probability = first_labeled_value(text, kProbabilityLabel);
  if (!probability) throw ParseMissingFieldError(kProbabilityLabel);
  outcome.mortality_probability = parse_strict_number(kProbabilityLabel, *probability);
  if (outcome.mortality_probability < 0.0 || outcome.mortality_probability > 1.0) {
    throw ParseRangeError(std::string(kProbabilityLabel) + " value " + *probability +
                          " is outside [0, 1]");
  }

  const auto los = first_labeled_value(text, kLosLabel);
  if (!los) throw ParseMissingFieldError(kLosLabel);
  outcome.predicted_los_days = parse_strict_number(kLosLabel, *los);
  if (outcome.predicted_los_days <= 0.0 || outcome.predicted_los_days > kMaxLosDays) {
    throw ParseRangeError(std::string(kLosLabel) + " value " + *los + " is outside (0, 365]");
  }

  const auto confidence = first_labeled_value(text, kConfidenceLabel);
  if (!confidence) throw ParseMissingFieldError(kConfidenceLabel);
  outcome.confidence = confidence_from_string(*confidence);

  const auto factors = first_labeled_value(text, kFactorsLabel);
  if (!factors) throw ParseMissingFieldError(kFactorsLabel);
  std::istringstream parts(*factors);
  std::string part;
  while (std::getline(parts, part, ';')) {
    const std::string factor = trim(part);
    if (!factor.empty()) outcome.key_factors.push_back(factor);
  }
  if (outcome.key_factors.empty()) {
    throw ParseFormatError(std::string(kFactorsLabel) + " must list at least one factor");
  }

  return outcome;
}

OutcomeStatus classify(double probability, double threshold) {
  if (probability < 0.0 || probability > 1.0) throw ConfigError("probability must lie in [0, 1]");
  if (threshold <= 0.0 || threshold >= 1.0) throw ConfigError("threshold must lie in (0, 1)");
  return probability >= threshold ? OutcomeStatus::expired : OutcomeStatus::survived;
}

}  // namespace icuflow
