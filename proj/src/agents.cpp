#include "icuflow/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>

#include "icuflow/errors.hpp"
#include "icuflow/ingestion.hpp"
#include "icuflow/prediction.hpp"
#include "icuflow/provider.hpp"

namespace icuflow {
namespace {

constexpr const char* kNoneReported = "NONE REPORTED";
constexpr const char* kOmittedForLength = "OMITTED FOR LENGTH";

std::string fmt(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return std::string(buf);
}

std::string channel(const std::optional<double>& value, int decimals) {
  return value ? fmt(*value, decimals) : std::string("-");
}

std::string render_vitals(const std::vector<VitalSample>& vitals) {
  if (vitals.empty()) return kNoneReported;
  std::string out;
  for (const auto& sample : vitals) {
    out += "t+" + std::to_string(sample.offset_minutes) + "min";
    out += " HR " + channel(sample.heart_rate, 1);
    out += " SBP " + channel(sample.sbp, 1);
    out += " SpO2 " + channel(sample.spo2, 1);
    out += " Temp " + channel(sample.temperature, 1);
    out += "\n";
  }
  out.pop_back();
  return out;
}

std::string render_labs(const std::vector<LabResult>& labs) {
  if (labs.empty()) return kNoneReported;
  std::string out;
  for (const auto& lab : labs) {
    out += lab.name + ": " + fmt(lab.value, 2);
    if (!lab.unit.empty()) out += " " + lab.unit;
    out += " (t+" + std::to_string(lab.offset_minutes) + "min)\n";
  }
  out.pop_back();
  return out;
}

std::string render_notes(const std::vector<ClinicalNote>& notes, std::size_t max_chars) {
  if (notes.empty()) return kNoneReported;
  std::string out;
  for (const auto& note : notes) {
    std::string body = note.text;
    if (max_chars > 0 && body.size() > max_chars) {
      body = body.substr(0, max_chars) + "[truncated]";
    }
    out += std::string("[") + to_string(note.author_role) + "] t+" +
           std::to_string(note.offset_minutes) + "min: " + body + "\n";
  }
  out.pop_back();
  return out;
}

std::string render_medications(const std::vector<MedicationEntry>& medications) {
  if (medications.empty()) return kNoneReported;
  std::string out;
  for (const auto& med : medications) {
    out += med.drug_name;
    if (!med.dose_text.empty()) out += ", " + med.dose_text;
    out += " (latest t+" + std::to_string(med.offset_minutes) + "min)\n";
  }
  out.pop_back();
  return out;
}

std::string render_apache(const ApacheBundle& apache) {
  if (apache.aps_variables.empty() && !apache.predicted_mortality && !apache.predicted_los_days) {
    return kNoneReported;
  }
  std::string out;
  for (const auto& [name, value] : apache.aps_variables) {
    out += name + ": " + fmt(value, 1) + "\n";
  }
  if (apache.predicted_mortality) {
    out += "APACHE_PREDICTED_MORTALITY: " + fmt(*apache.predicted_mortality, 4) + "\n";
  }
  if (apache.predicted_los_days) {
    out += "APACHE_PREDICTED_LOS_DAYS: " + fmt(*apache.predicted_los_days, 2) + "\n";
  }
  out.pop_back();
  return out;
}

std::string render_exemplars(const std::vector<FewShotExemplar>* exemplars) {
  if (exemplars == nullptr || exemplars->empty()) return kNoneReported;
  std::string out;
  for (const auto& exemplar : *exemplars) {
    out += exemplar.render() + "\n\n";
  }
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out;
}

std::string render_actual_outcome(const OutcomeLabel& outcome) {
  return std::string("status: ") + to_string(outcome.status) +
         "; actual length of stay: " + fmt(outcome.actual_los_days, 2) + " days";
}

// Shrink stages applied when a rendered prompt exceeds its budget. Notes give
// way first, then medications, then labs; vitals and severity variables stay.
constexpr int kShrinkNotes = 1;
constexpr int kShrinkMedications = 2;
constexpr int kShrinkLabs = 3;

std::string render_section_body(const AgentSpec& spec, const SectionSpec& section,
                                const RenderInputs& inputs, int shrink_level) {
  const std::string& source = section.source;
  if (source.rfind("text:", 0) == 0) return source.substr(5);
  if (source.rfind("upstream:", 0) == 0) {
    const std::string key = source.substr(9);
    if (inputs.upstream == nullptr || inputs.upstream->count(key) == 0) {
      throw MissingDependencyError(spec.name, key);
    }
    return inputs.upstream->at(key);
  }
  if (source == "exemplars") return render_exemplars(inputs.exemplars);
  if (source == "actual_outcome") {
    if (spec.name != "validation") {
      throw ConfigError("section source actual_outcome is only available to the validation agent");
    }
    if (!inputs.actual_outcome) throw MissingDependencyError(spec.name, "actual_outcome");
    return render_actual_outcome(*inputs.actual_outcome);
  }

  if (inputs.features == nullptr) throw MissingDependencyError(spec.name, source);
  const FeatureBundle& features = *inputs.features;
  if (source == "demographics") return features.demographics.summary();
  if (source == "vitals") return render_vitals(features.recent_vitals);
  if (source == "labs") {
    if (shrink_level >= kShrinkLabs) return kOmittedForLength;
    return render_labs(features.distinct_labs);
  }
  if (source == "notes") {
    const std::size_t cap = shrink_level >= kShrinkNotes ? 600 : 0;
    return render_notes(features.selected_notes, cap);
  }
  if (source == "medications") {
    if (shrink_level >= kShrinkMedications) return kOmittedForLength;
    return render_medications(features.top_medications);
  }
  if (source == "apache") return render_apache(features.apache);
  throw ConfigError("unknown prompt section source: " + source);
}

std::string contract_instructions(OutputContract contract) {
  switch (contract) {
    case OutputContract::free_text:
      return "Respond with concise clinical prose organized under the section headings you were given.";
    case OutputContract::prediction_template:
      return "Your response must contain these four lines, each exactly once and formatted exactly:\n" +
             render_prediction_contract() +
             "\nDo not wrap these lines in markdown or add anything else to them.";
    case OutputContract::validation_template:
      return "Review the materials, then end your response with one line of the form "
             "'VERDICT: <CONSISTENT|REVIEW_REQUIRED>'.";
  }
  throw ConfigError("unknown output contract");
}

// Numeric-aware id ordering: ids that are both integers compare by value, so
// "9" sorts before "10".
bool stay_id_less(const std::string& a, const std::string& b) {
  const bool a_num = !a.empty() && a.find_first_not_of("0123456789") == std::string::npos;
  const bool b_num = !b.empty() && b.find_first_not_of("0123456789") == std::string::npos;
  if (a_num && b_num) {
    if (a.size() != b.size()) return a.size() < b.size();
  }
  return a < b;
}

std::size_t completeness_score(const PatientRecord& record) {
  std::set<std::string> lab_names;
  for (const auto& lab : record.labs) lab_names.insert(lab.name);
  return record.apache.aps_variables.size() + lab_names.size() + record.notes.size();
}

FewShotExemplar make_exemplar(const PatientRecord& record) {
  const FeatureBundle features = extract_features(record);
  FewShotExemplar exemplar;
  exemplar.stay_id = record.stay_id;
  exemplar.outcome = record.outcome.status;
  exemplar.demographics_text = record.demographics.summary();
  exemplar.apache_lines = render_apache(features.apache);
  exemplar.lab_lines = render_labs(features.distinct_labs);
  exemplar.vital_lines = render_vitals(features.recent_vitals);
  exemplar.outcome_line = std::string("ACTUAL_OUTCOME: ") + to_string(record.outcome.status) +
                          "\nACTUAL_LOS_DAYS: " + fmt(record.outcome.actual_los_days, 2);
  return exemplar;
}

}  // namespace

std::string to_string(OutputContract contract) {
  switch (contract) {
    case OutputContract::free_text: return "free_text";
    case OutputContract::prediction_template: return "prediction_template";
    case OutputContract::validation_template: return "validation_template";
  }
  throw ConfigError("unknown output contract");
}

OutputContract output_contract_from_string(const std::string& text) {
  if (text == "free_text") return OutputContract::free_text;
  if (text == "prediction_template") return OutputContract::prediction_template;
  if (text == "validation_template") return OutputContract::validation_template;
  throw ConfigError("unknown output contract: " + text);
}

std::string FewShotExemplar::render() const {
  std::string out = std::string("CASE (outcome: ") + to_string(outcome) + ")\n";
  out += "DEMOGRAPHICS\n" + demographics_text + "\n";
  out += "SEVERITY VARIABLES\n" + apache_lines + "\n";
  out += "LABS\n" + lab_lines + "\n";
  out += "VITALS\n" + vital_lines + "\n";
  out += outcome_line;
  return out;
}

std::vector<FewShotExemplar> build_few_shot(const std::vector<PatientRecord>& pool) {
  const PatientRecord* best_expired = nullptr;
  const PatientRecord* best_survived = nullptr;
  std::size_t best_expired_score = 0;
  std::size_t best_survived_score = 0;
  for (const auto& record : pool) {
    const std::size_t score = completeness_score(record);
    const PatientRecord*& best =
        record.outcome.status == OutcomeStatus::expired ? best_expired : best_survived;
    std::size_t& best_score =
        record.outcome.status == OutcomeStatus::expired ? best_expired_score : best_survived_score;
    if (best == nullptr || score > best_score ||
        (score == best_score && stay_id_less(record.stay_id, best->stay_id))) {
      best = &record;
      best_score = score;
    }
  }
  if (best_expired == nullptr) throw StratumError("few-shot pool lacks expired records");
  if (best_survived == nullptr) throw StratumError("few-shot pool lacks survived records");
  return {make_exemplar(*best_expired), make_exemplar(*best_survived)};
}

std::string truncate_to_budget(const std::string& text, std::size_t budget_tokens) {
  if (budget_tokens == 0) throw ConfigError("token budget must be >= 1");
  if ((text.size() + 3) / 4 <= budget_tokens) return text;
  std::size_t cut = budget_tokens * 4;
  std::size_t candidate = cut;
  while (candidate > 0 && !std::isspace(static_cast<unsigned char>(text[candidate - 1]))) {
    --candidate;
  }
  if (candidate > 0) cut = candidate;
  std::string out = text.substr(0, cut);
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out + "[truncated]";
}

RenderedPrompt render_prompt(const AgentSpec& spec, const RenderInputs& inputs) {
  if (inputs.token_budget == 0) throw ConfigError("token budget must be >= 1");

  RenderedPrompt prompt;
  prompt.system_text = "You are the " + spec.name +
                       " agent in an intensive-care decision-support pipeline. " + spec.mission +
                       "\n" + contract_instructions(spec.output_contract);

  const std::size_t system_tokens = token_estimate(prompt.system_text);
  for (int shrink_level = 0; shrink_level <= kShrinkLabs; ++shrink_level) {
    std::string user;
    for (const auto& section : spec.sections) {
      if (section.heading.empty()) throw ConfigError("prompt section heading must be non-empty");
      std::string body = render_section_body(spec, section, inputs, shrink_level);
      if (body.empty()) body = kNoneReported;
      user += section.heading + "\n" + body + "\n\n";
    }
    while (!user.empty() && user.back() == '\n') user.pop_back();
    if (system_tokens + token_estimate(user) <= inputs.token_budget || shrink_level == kShrinkLabs) {
      prompt.user_text = std::move(user);
      break;
    }
  }

  // Last resort when even the most aggressive shrink stage does not fit.
  if (system_tokens + token_estimate(prompt.user_text) > inputs.token_budget) {
    if (system_tokens + 4 >= inputs.token_budget) {
      throw ConfigError("token budget " + std::to_string(inputs.token_budget) +
                        " cannot fit the system text for agent " + spec.name);
    }
    prompt.user_text = truncate_to_budget(prompt.user_text, inputs.token_budget - system_tokens - 3);
  }
  return prompt;
}

std::vector<AgentSpec> default_agent_specs(const std::string& model_id) {
  std::vector<AgentSpec> specs;

  specs.push_back(
      {"lab_analysis",
       "Identify abnormal laboratory values, flag clinically significant derangements, and "
       "summarize their organ-system implications.",
       {
           {"LABORATORY RESULTS", "labs"},
           {"APACHE RELEVANT FINDINGS", "apache"},
           {"KEY ABNORMALITIES",
            "text:List the most clinically significant abnormalities and why they matter."},
       },
       OutputContract::free_text,
       model_id});

  specs.push_back(
      {"vitals_analysis",
       "Assess physiological stability from the vital-sign series, covering hemodynamic, "
       "respiratory, and thermoregulatory trends.",
       {
           {"VITAL SIGNS", "vitals"},
           {"PHYSIOLOGICAL STABILITY", "text:Summarize overall stability and trend direction."},
           {"RESPIRATORY FUNCTION", "text:Assess oxygenation and respiratory trajectory."},
           {"CARDIOVASCULAR PERFORMANCE", "text:Assess perfusion, pressure, and rhythm stability."},
       },
       OutputContract::free_text,
       model_id});

  specs.push_back(
      {"context_analysis",
       "Extract diagnoses, comorbidities, and treatment context from the clinical notes and the "
       "medication list.",
       {
           {"CLINICAL NOTES", "notes"},
           {"MEDICATIONS", "medications"},
           {"DIAGNOSES", "text:List active diagnoses and comorbidities evident from the record."},
           {"RISK FACTORS", "text:List contextual risk factors relevant to ICU outcomes."},
           {"TRAJECTORY", "text:Describe the clinical trajectory suggested by the notes."},
       },
       OutputContract::free_text,
       model_id});

  specs.push_back(
      {"integration",
       "Fuse the upstream analyses into one unified patient representation, reconciling conflicts "
       "and ranking system-level risks.",
       {
           {"LAB ANALYSIS", "upstream:lab_analysis"},
           {"VITALS ANALYSIS", "upstream:vitals_analysis"},
           {"CONTEXT ANALYSIS", "upstream:context_analysis"},
           {"SYSTEM-BY-SYSTEM ASSESSMENT",
            "text:Integrate the analyses above into a system-by-system assessment."},
           {"ICU RISK PRIORITIES", "text:Rank the three most pressing risks for this stay."},
       },
       OutputContract::free_text,
       model_id});

  specs.push_back(
      {"prediction",
       "Estimate ICU mortality probability and remaining length of stay from the integrated "
       "assessment, the reference severity findings, and the example cases.",
       {
           {"EXAMPLE CASES", "exemplars"},
           {"INTEGRATED ASSESSMENT", "upstream:integration"},
           {"APACHE RELEVANT FINDINGS", "apache"},
           {"DEMOGRAPHICS", "demographics"},
       },
       OutputContract::prediction_template,
       model_id});

  specs.push_back(
      {"transparency",
       "Explain how the prediction was produced: the decisive features, the reasoning process, "
       "and the provenance of the underlying data.",
       {
           {"PREDICTION OUTPUT", "upstream:prediction"},
           {"INTEGRATED ASSESSMENT", "upstream:integration"},
       },
       OutputContract::free_text,
       model_id});

  specs.push_back(
      {"validation",
       "Compare the predicted outcome against the actual recorded outcome and state whether the "
       "reasoning held up.",
       {
           {"PREDICTED OUTCOME", "upstream:prediction"},
           {"TRANSPARENCY NOTES", "upstream:transparency"},
           {"ACTUAL OUTCOME", "actual_outcome"},
       },
       OutputContract::validation_template,
       model_id});

  specs.push_back(
      {"sas_all_in_one",
       "Perform the complete assessment alone: review all patient data, predict ICU mortality "
       "probability and remaining length of stay, and explain your reasoning.",
       {
           {"EXAMPLE CASES", "exemplars"},
           {"DEMOGRAPHICS", "demographics"},
           {"VITAL SIGNS", "vitals"},
           {"LABORATORY RESULTS", "labs"},
           {"CLINICAL NOTES", "notes"},
           {"MEDICATIONS", "medications"},
           {"APACHE RELEVANT FINDINGS", "apache"},
           {"EXPLANATION",
            "text:After the required lines, explain the reasoning behind your estimate in plain "
            "terms for the care team."},
       },
       OutputContract::prediction_template,
       model_id});

  return specs;
}

const AgentSpec& find_agent_spec(const std::vector<AgentSpec>& specs, const std::string& name) {
  for (const auto& spec : specs) {
    if (spec.name == name) return spec;
  }
  throw ConfigError("no agent spec named " + name);
}

nlohmann::ordered_json agent_specs_to_json(const std::vector<AgentSpec>& specs) {
  nlohmann::ordered_json doc;
  doc["agents"] = nlohmann::ordered_json::array();
  for (const auto& spec : specs) {
    nlohmann::ordered_json agent;
    agent["name"] = spec.name;
    agent["mission"] = spec.mission;
    agent["model_id"] = spec.model_id;
    agent["output_contract"] = to_string(spec.output_contract);
    agent["sections"] = nlohmann::ordered_json::array();
    for (const auto& section : spec.sections) {
      agent["sections"].push_back({{"heading", section.heading}, {"source", section.source}});
    }
    doc["agents"].push_back(std::move(agent));
  }
  return doc;
}

std::vector<AgentSpec> agent_specs_from_json(const nlohmann::json& doc) {
  std::vector<AgentSpec> specs;
  for (const auto& agent : doc.at("agents")) {
    AgentSpec spec;
    spec.name = agent.at("name").get<std::string>();
    spec.mission = agent.at("mission").get<std::string>();
    spec.model_id = agent.at("model_id").get<std::string>();
    spec.output_contract = output_contract_from_string(agent.at("output_contract").get<std::string>());
    for (const auto& section : agent.at("sections")) {
      spec.sections.push_back(
          {section.at("heading").get<std::string>(), section.at("source").get<std::string>()});
    }
    if (spec.name.empty()) throw ConfigError("agent spec without a name");
    specs.push_back(std::move(spec));
  }
  return specs;
}

}  // namespace icuflow
