#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vendor/json.hpp"

#include "icuflow/patient.hpp"

namespace icuflow {

enum class OutputContract { free_text, prediction_template, validation_template };

std::string to_string(OutputContract contract);
OutputContract output_contract_from_string(const std::string& text);

// One prompt section: an uppercase heading plus a body source. Sources:
//   demographics | vitals | labs | notes | medications | apache | exemplars |
//   actual_outcome | upstream:<agent> | text:<literal directive>
struct SectionSpec {
  std::string heading;
  std::string source;
};

struct AgentSpec {
  std::string name;
  std::string mission;
  std::vector<SectionSpec> sections;
  OutputContract output_contract = OutputContract::free_text;
  std::string model_id;
};

// One embedded example case: a past patient rendered as segmented blocks with
// its actual outcome, used to ground the prediction agent.
struct FewShotExemplar {
  std::string stay_id;
  OutcomeStatus outcome = OutcomeStatus::survived;
  std::string demographics_text;
  std::string apache_lines;
  std::string lab_lines;
  std::string vital_lines;
  std::string outcome_line;

  std::string render() const;
};

// Picks one exemplar per outcome status from the pool: within each stratum
// the record maximizing (APACHE variable count + distinct lab names + note
// count) wins, ties broken by ascending stay id. Throws StratumError when a
// stratum is empty.
std::vector<FewShotExemplar> build_few_shot(const std::vector<PatientRecord>& pool);

struct RenderInputs {
  const FeatureBundle* features = nullptr;
  const std::map<std::string, std::string>* upstream = nullptr;
  const std::vector<FewShotExemplar>* exemplars = nullptr;
  std::optional<OutcomeLabel> actual_outcome;  // validation agent only
  std::size_t token_budget = 10000;
};

struct RenderedPrompt {
  std::string system_text;
  std::string user_text;
};

// Renders mission + output-contract instructions into system_text and the
// template sections into user_text. Deterministic for fixed inputs. Missing
// upstream outputs raise MissingDependencyError; absent data renders as
// "NONE REPORTED". When the rendered pair exceeds the token budget, section
// bodies shrink in stages (notes first, then medications, then labs; vitals
// and severity variables are never cut) and as a last resort the user text is
// hard-truncated so estimate(system) + estimate(user) <= budget always holds.
RenderedPrompt render_prompt(const AgentSpec& spec, const RenderInputs& inputs);

// Unchanged when the estimate fits the budget; otherwise cut at budget * 4
// characters back to the nearest preceding whitespace, with a "[truncated]"
// suffix.
std::string truncate_to_budget(const std::string& text, std::size_t budget_tokens);

// The seven pipeline agents plus the all-in-one single-agent variant, all
// bound to the given model id.
std::vector<AgentSpec> default_agent_specs(const std::string& model_id);

const AgentSpec& find_agent_spec(const std::vector<AgentSpec>& specs, const std::string& name);

nlohmann::ordered_json agent_specs_to_json(const std::vector<AgentSpec>& specs);
std::vector<AgentSpec> agent_specs_from_json(const nlohmann::json& doc);

}  // namespace icuflow
