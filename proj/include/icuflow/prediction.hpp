#pragma once

#include <string>
#include <vector>

#include "icuflow/patient.hpp"

namespace icuflow {

enum class Confidence { low, medium, high };

std::string to_string(Confidence confidence);
Confidence confidence_from_string(const std::string& text);

struct PredictionOutcome {
  double mortality_probability = 0.0;  // in [0, 1]
  double predicted_los_days = 0.0;     // in (0, 365]
  Confidence confidence = Confidence::low;
  std::vector<std::string> key_factors;  // non-empty
  std::string raw_text;
};

// The exact output block prediction agents are instructed to emit. Byte
// stable: this text is the wire contract between agents and the parser.
//
//   MORTALITY_PROBABILITY: <0.00-1.00>
//   PREDICTED_LOS_DAYS: <positive number>
//   CONFIDENCE: <LOW|MEDIUM|HIGH>
//   KEY_FACTORS: <factor; factor; ...>
std::string render_prediction_contract();

// Renders an outcome as the four contract lines (no surrounding prose).
std::string render_prediction(const PredictionOutcome& outcome);

// Locates the four labeled lines anywhere in the text; the first occurrence
// of each label wins. Surrounding prose is ignored; the labeled lines are
// parsed strictly. Throws ParseMissingFieldError, ParseRangeError, or
// ParseFormatError.
PredictionOutcome parse_prediction(const std::string& text);

// expired iff probability >= threshold. Probability must lie in [0, 1] and
// threshold in (0, 1).
OutcomeStatus classify(double probability, double threshold = 0.5);

}  // namespace icuflow
