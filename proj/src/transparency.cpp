#include "icuflow/transparency.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "icuflow/errors.hpp"

namespace icuflow {
namespace {

DimensionRubric make_dimension(Dimension dimension,
                               std::vector<std::pair<std::string, std::vector<std::string>>> criteria) {
  DimensionRubric out;
  out.dimension = dimension;
  const double weight = 1.0 / static_cast<double>(criteria.size());
  for (auto& [name, patterns] : criteria) {
    out.criteria.push_back({name, std::move(patterns), weight});
  }
  return out;
}

Rubric build_default_rubric() {
  Rubric rubric;
  rubric.dimensions.push_back(make_dimension(
      Dimension::explainability,
      {
          {"feature_importance", {"most important factor", "key driver", "contributing factor"}},
          {"critical_concentration", {"critical value", "dominant abnormality", "concentrated risk"}},
          {"clear_reasoning", {"because", "therefore", "which indicates"}},
          {"stakeholder_explanation",
           {"in plain terms", "for the care team", "what this means clinically"}},
      }));
  rubric.dimensions.push_back(make_dimension(
      Dimension::interpretability,
      {
          {"reasoning_process", {"step by step", "reasoning process", "chain of reasoning"}},
          {"prediction_predictability", {"consistent with", "as expected", "in line with prior"}},
          {"complexity", {"multifactorial", "nonlinear interaction", "competing influences"}},
          {"alternative_scenarios", {"alternative scenario", "if instead", "had the patient"}},
      }));
  rubric.dimensions.push_back(make_dimension(
      Dimension::traceability,
      {
          {"input_sources", {"data source", "derived from the labs", "based on recorded vitals"}},
          {"transformations", {"normalized", "aggregated", "carried forward"}},
          {"model_history", {"model version", "reference model", "prior runs"}},
          {"decision_process", {"decision process", "decision trail", "weighed the evidence"}},
      }));
  return rubric;
}

}  // namespace

std::string to_string(Dimension dimension) {
  switch (dimension) {
    case Dimension::explainability: return "explainability";
    case Dimension::interpretability: return "interpretability";
    case Dimension::traceability: return "traceability";
  }
  throw ConfigError("unknown transparency dimension");
}

Dimension dimension_from_string(const std::string& text) {
  if (text == "explainability") return Dimension::explainability;
  if (text == "interpretability") return Dimension::interpretability;
  if (text == "traceability") return Dimension::traceability;
  throw ConfigError("unknown transparency dimension: " + text);
}

std::string normalize_for_scoring(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

void validate_rubric(const Rubric& rubric) {
  if (rubric.dimensions.empty()) throw ConfigError("rubric has no dimensions");
  for (const auto& dim : rubric.dimensions) {
    if (dim.criteria.empty()) {
      throw ConfigError("rubric dimension " + to_string(dim.dimension) + " has no criteria");
    }
    double total = 0.0;
    for (const auto& criterion : dim.criteria) {
      if (criterion.criterion.empty()) throw ConfigError("rubric criterion without a name");
      if (criterion.patterns.empty()) {
        throw ConfigError("rubric criterion " + criterion.criterion + " has no patterns");
      }
      for (const auto& pattern : criterion.patterns) {
        if (pattern.empty()) throw ConfigError("rubric criterion " + criterion.criterion + " has an empty pattern");
      }
      if (criterion.weight < 0.0) {
        throw ConfigError("rubric criterion " + criterion.criterion + " has a negative weight");
      }
      total += criterion.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
      throw ConfigError("rubric dimension " + to_string(dim.dimension) + " weights must sum to 1");
    }
  }
}

DimensionScore score_dimension(const std::string& text, const DimensionRubric& rubric,
                               std::map<std::string, std::vector<std::string>>* evidence) {
  const std::string normalized = normalize_for_scoring(text);
  DimensionScore out;
  out.dimension = rubric.dimension;
  for (const auto& criterion : rubric.criteria) {
    std::size_t matched = 0;
    for (const auto& pattern : criterion.patterns) {
      std::regex re;
      try {
        re = std::regex(pattern, std::regex::icase | std::regex::ECMAScript);
      } catch (const std::regex_error& err) {
        throw ConfigError("rubric pattern '" + pattern + "' is not a valid regex: " + err.what());
      }
      std::smatch match;
      if (std::regex_search(normalized, match, re)) {
        ++matched;
        if (evidence != nullptr) (*evidence)[criterion.criterion].push_back(match.str());
      }
    }
    const double score =
        100.0 * static_cast<double>(matched) / static_cast<double>(criterion.patterns.size());
    out.criterion_scores[criterion.criterion] = std::min(score, 100.0);
  }
  double weighted = 0.0;
  for (const auto& criterion : rubric.criteria) {
    weighted += criterion.weight * out.criterion_scores.at(criterion.criterion);
  }
  out.score = weighted;
  return out;
}

TransparencyReport score_transparency(const std::string& prediction_text, const std::string& explanation_text,
                                      const Rubric& rubric) {
  validate_rubric(rubric);
  const std::string combined = prediction_text + "\n" + explanation_text;
  TransparencyReport report;
  double total = 0.0;
  for (const auto& dim : rubric.dimensions) {
    report.dimensions.push_back(score_dimension(combined, dim, &report.evidence));
    total += report.dimensions.back().score;
  }
  report.overall = total / static_cast<double>(rubric.dimensions.size());
  return report;
}

TransparencyReport score_transparency(const std::string& prediction_text, const std::string& explanation_text) {
  return score_transparency(prediction_text, explanation_text, default_rubric());
}

const Rubric& default_rubric() {
  static const Rubric rubric = build_default_rubric();
  return rubric;
}

Rubric rubric_from_json(const nlohmann::json& doc) {
  Rubric rubric;
  if (!doc.contains("dimensions") || !doc.at("dimensions").is_array()) {
    throw ConfigError("rubric document must contain a dimensions array");
  }
  for (const auto& dim_doc : doc.at("dimensions")) {
    DimensionRubric dim;
    dim.dimension = dimension_from_string(dim_doc.at("dimension").get<std::string>());
    for (const auto& crit_doc : dim_doc.at("criteria")) {
      CriterionRubric criterion;
      criterion.criterion = crit_doc.at("criterion").get<std::string>();
      criterion.weight = crit_doc.at("weight").get<double>();
      for (const auto& pattern : crit_doc.at("patterns")) {
        criterion.patterns.push_back(pattern.get<std::string>());
      }
      dim.criteria.push_back(std::move(criterion));
    }
    rubric.dimensions.push_back(std::move(dim));
  }
  validate_rubric(rubric);
  return rubric;
}

nlohmann::ordered_json rubric_to_json(const Rubric& rubric) {
  nlohmann::ordered_json doc;
  doc["dimensions"] = nlohmann::ordered_json::array();
  for (const auto& dim : rubric.dimensions) {
    nlohmann::ordered_json dim_doc;
    dim_doc["dimension"] = to_string(dim.dimension);
    dim_doc["criteria"] = nlohmann::ordered_json::array();
    for (const auto& criterion : dim.criteria) {
      nlohmann::ordered_json crit_doc;
      crit_doc["criterion"] = criterion.criterion;
      crit_doc["weight"] = criterion.weight;
      crit_doc["patterns"] = criterion.patterns;
      dim_doc["criteria"].push_back(std::move(crit_doc));
    }
    doc["dimensions"].push_back(std::move(dim_doc));
  }
  return doc;
}

Rubric load_rubric_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rubric file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError("rubric file " + path.string() + " is not valid JSON: " + err.what());
  }
  return rubric_from_json(doc);
}

nlohmann::ordered_json report_to_json(const TransparencyReport& report) {
  nlohmann::ordered_json doc;
  doc["overall"] = report.overall;
  doc["dimensions"] = nlohmann::ordered_json::array();
  for (const auto& dim : report.dimensions) {
    nlohmann::ordered_json dim_doc;
    dim_doc["dimension"] = to_string(dim.dimension);
    dim_doc["score"] = dim.score;
    dim_doc["criteria"] = nlohmann::ordered_json::object();
    for (const auto& [name, score] : dim.criterion_scores) dim_doc["criteria"][name] = score;
    doc["dimensions"].push_back(std::move(dim_doc));
  }
  doc["evidence"] = nlohmann::ordered_json::object();
  for (const auto& [criterion, snippets] : report.evidence) doc["evidence"][criterion] = snippets;
  return doc;
}

TransparencyReport report_from_json(const nlohmann::json& doc) {
  TransparencyReport report;
  report.overall = doc.at("overall").get<double>();
  for (const auto& dim_doc : doc.at("dimensions")) {
    DimensionScore dim;
    dim.dimension = dimension_from_string(dim_doc.at("dimension").get<std::string>());
    dim.score = dim_doc.at("score").get<double>();
    for (const auto& [name, score] : dim_doc.at("criteria").items()) {
      dim.criterion_scores[name] = score.get<double>();
    }
    report.dimensions.push_back(std::move(dim));
  }
  if (doc.contains("evidence")) {
    for (const auto& [criterion, snippets] : doc.at("evidence").items()) {
      for (const auto& snippet : snippets) report.evidence[criterion].push_back(snippet.get<std::string>());
    }
  }
  return report;
}

}  // namespace icuflow
