#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vendor/json.hpp"

namespace icuflow {

enum class Dimension { explainability, interpretability, traceability };

std::string to_string(Dimension dimension);
Dimension dimension_from_string(const std::string& text);

struct CriterionRubric {
  std::string criterion;
  std::vector<std::string> patterns;  // case-insensitive regexes over normalized text
  double weight = 0.0;
};

struct DimensionRubric {
  Dimension dimension = Dimension::explainability;
  std::vector<CriterionRubric> criteria;  // weights sum to 1 within the dimension
};

struct Rubric {
  std::vector<DimensionRubric> dimensions;
};

struct DimensionScore {
  Dimension dimension = Dimension::explainability;
  std::map<std::string, double> criterion_scores;  // each in [0, 100]
  double score = 0.0;                              // weighted mean of criterion scores
};

struct TransparencyReport {
  std::vector<DimensionScore> dimensions;
  double overall = 0.0;  // unweighted mean of the dimension scores
  std::map<std::string, std::vector<std::string>> evidence;  // criterion -> matched snippets
};

// Lowercases, collapses whitespace runs to single spaces, trims the ends.
// All pattern matching runs over this form, so markers match across line
// breaks and casing.
std::string normalize_for_scoring(const std::string& text);

// Throws ConfigError on empty pattern lists, negative weights, or dimension
// weights that do not sum to 1.
void validate_rubric(const Rubric& rubric);

// Criterion score = 100 * matched distinct patterns / total patterns.
DimensionScore score_dimension(const std::string& text, const DimensionRubric& rubric,
                               std::map<std::string, std::vector<std::string>>* evidence = nullptr);

TransparencyReport score_transparency(const std::string& prediction_text, const std::string& explanation_text,
                                      const Rubric& rubric);
TransparencyReport score_transparency(const std::string& prediction_text, const std::string& explanation_text);

// Built-in rubric: three dimensions, four equally weighted criteria each.
// config/transparency_rubric.json ships the same content as a data file.
const Rubric& default_rubric();

Rubric rubric_from_json(const nlohmann::json& doc);
nlohmann::ordered_json rubric_to_json(const Rubric& rubric);
Rubric load_rubric_file(const std::filesystem::path& path);

nlohmann::ordered_json report_to_json(const TransparencyReport& report);
TransparencyReport report_from_json(const nlohmann::json& doc);

}  // namespace icuflow
