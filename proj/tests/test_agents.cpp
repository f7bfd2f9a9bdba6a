#include <map>

#include "vendor/doctest.h"

#include "icuflow/agents.hpp"
#include "icuflow/errors.hpp"
#include "icuflow/ingestion.hpp"
#include "icuflow/provider.hpp"

#include "support.hpp"

using namespace icuflow;

namespace {

RenderInputs inputs_for(const FeatureBundle& features, const std::vector<FewShotExemplar>* exemplars = nullptr,
                        const std::map<std::string, std::string>* upstream = nullptr) {
  RenderInputs inputs;
  inputs.features = &features;
  inputs.exemplars = exemplars;
  inputs.upstream = upstream;
  return inputs;
}

}  // namespace

TEST_CASE("few-shot selection prefers the most complete record per stratum") {
  auto pool = testing::make_pool(3, 3);
  pool[1].labs.push_back({"bilirubin", 2.0, "mg/dL", 70});
  pool[1].notes.push_back({AuthorRole::nurse, 200, "extra note"});
  pool[4].labs.push_back({"troponin", 0.4, "ng/mL", 70});

  const auto exemplars = build_few_shot(pool);
  REQUIRE(exemplars.size() == 2);
  CHECK(exemplars[0].outcome == OutcomeStatus::expired);
  CHECK(exemplars[0].stay_id == pool[1].stay_id);
  CHECK(exemplars[1].outcome == OutcomeStatus::survived);
  CHECK(exemplars[1].stay_id == pool[4].stay_id);
}

TEST_CASE("few-shot ties break on ascending numeric stay id") {
  std::vector<PatientRecord> pool;
  pool.push_back(testing::make_patient("10", 0.8, true));
  pool.push_back(testing::make_patient("9", 0.7, true));
  pool.push_back(testing::make_patient("5", 0.2, false));
  const auto exemplars = build_few_shot(pool);
  CHECK(exemplars[0].stay_id == "9");
}

TEST_CASE("few-shot requires both outcome strata") {
  std::vector<PatientRecord> pool{testing::make_patient("1", 0.2, false)};
  CHECK_THROWS_AS(build_few_shot(pool), StratumError);
}

TEST_CASE("exemplars render as segmented cases with the actual outcome") {
  const auto exemplars = build_few_shot(testing::make_pool(2, 2));
  const auto text = exemplars[0].render();
  CHECK(text.find("CASE (outcome: expired)") == 0);
  CHECK(text.find("DEMOGRAPHICS") != std::string::npos);
  CHECK(text.find("SEVERITY VARIABLES") != std::string::npos);
  CHECK(text.find("APACHE_PREDICTED_MORTALITY:") != std::string::npos);
  CHECK(text.find("ACTUAL_OUTCOME: expired") != std::string::npos);
  CHECK(text.find("ACTUAL_LOS_DAYS:") != std::string::npos);
}

TEST_CASE("default specs cover the pipeline and the all-in-one variant") {
  const auto specs = default_agent_specs("model-x");
  CHECK(specs.size() == 8);
  for (const auto name : {"lab_analysis", "vitals_analysis", "context_analysis", "integration",
                          "prediction", "transparency", "validation", "sas_all_in_one"}) {
    CHECK(find_agent_spec(specs, name).model_id == "model-x");
  }
  CHECK(find_agent_spec(specs, "prediction").output_contract == OutputContract::prediction_template);
  CHECK(find_agent_spec(specs, "sas_all_in_one").output_contract == OutputContract::prediction_template);
  CHECK(find_agent_spec(specs, "validation").output_contract == OutputContract::validation_template);
  CHECK_THROWS_AS(find_agent_spec(specs, "unknown_agent"), ConfigError);
}

TEST_CASE("agent specs round-trip through json") {
  const auto specs = default_agent_specs("m");
  const auto back = agent_specs_from_json(agent_specs_to_json(specs));
  REQUIRE(back.size() == specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CHECK(back[i].name == specs[i].name);
    CHECK(back[i].mission == specs[i].mission);
    CHECK(back[i].output_contract == specs[i].output_contract);
    REQUIRE(back[i].sections.size() == specs[i].sections.size());
    for (std::size_t j = 0; j < specs[i].sections.size(); ++j) {
      CHECK(back[i].sections[j].heading == specs[i].sections[j].heading);
      CHECK(back[i].sections[j].source == specs[i].sections[j].source);
    }
  }
}

TEST_CASE("rendering is deterministic and carries the role sentence") {
  const auto specs = default_agent_specs("m");
  const auto& spec = find_agent_spec(specs, "lab_analysis");
  const auto features = extract_features(testing::make_patient("77", 0.6, true));

  const auto a = render_prompt(spec, inputs_for(features));
  const auto b = render_prompt(spec, inputs_for(features));
  CHECK(a.system_text == b.system_text);
  CHECK(a.user_text == b.user_text);

  CHECK(a.system_text.find("You are the lab_analysis agent") == 0);
  CHECK(a.user_text.find("LABORATORY RESULTS\n") != std::string::npos);
  CHECK(a.user_text.find("APACHE RELEVANT FINDINGS\n") != std::string::npos);
  CHECK(a.user_text.find("KEY ABNORMALITIES\n") != std::string::npos);
  CHECK(a.user_text.find("lactate") != std::string::npos);
}

TEST_CASE("absent data renders as a placeholder") {
  auto record = testing::make_patient("77", 0.4, false);
  record.medications.clear();
  const auto features = extract_features(record);
  const auto specs = default_agent_specs("m");
  const auto prompt = render_prompt(find_agent_spec(specs, "context_analysis"), inputs_for(features));
  CHECK(prompt.user_text.find("MEDICATIONS\nNONE REPORTED") != std::string::npos);
}

TEST_CASE("missing upstream output names the agent and the key") {
  const auto specs = default_agent_specs("m");
  const auto features = extract_features(testing::make_patient("77", 0.5, true));
  const std::map<std::string, std::string> upstream{{"lab_analysis", "labs look bad"}};

  try {
    render_prompt(find_agent_spec(specs, "integration"), inputs_for(features, nullptr, &upstream));
    FAIL("expected MissingDependencyError");
  } catch (const MissingDependencyError& err) {
    CHECK(err.agent() == "integration");
    CHECK(err.key() == "vitals_analysis");
  }
}

TEST_CASE("prediction prompt places example cases before the live severity block") {
  const auto specs = default_agent_specs("m");
  const auto pool = testing::make_pool(2, 2);
  const auto exemplars = build_few_shot(pool);
  const auto features = extract_features(testing::make_patient("77", 0.5, true));
  const std::map<std::string, std::string> upstream{{"integration", "integrated assessment"}};

  for (const auto name : {"prediction", "sas_all_in_one"}) {
    const auto& spec = find_agent_spec(specs, name);
    RenderInputs inputs = inputs_for(features, &exemplars, &upstream);
    const auto prompt = render_prompt(spec, inputs);
    const auto cases = prompt.user_text.find("EXAMPLE CASES");
    const auto live = prompt.user_text.find("APACHE RELEVANT FINDINGS");
    REQUIRE(cases != std::string::npos);
    REQUIRE(live != std::string::npos);
    CHECK(cases < live);
  }
}

TEST_CASE("actual outcome is reserved for the validation agent") {
  const auto specs = default_agent_specs("m");
  const auto record = testing::make_patient("77", 0.8, true);
  const auto features = extract_features(record);
  const std::map<std::string, std::string> upstream{{"prediction", "MORTALITY_PROBABILITY: 0.8"},
                                                    {"transparency", "because of lactate"}};

  RenderInputs inputs = inputs_for(features, nullptr, &upstream);
  inputs.actual_outcome = record.outcome;
  const auto prompt = render_prompt(find_agent_spec(specs, "validation"), inputs);
  CHECK(prompt.user_text.find("ACTUAL OUTCOME") != std::string::npos);
  CHECK(prompt.user_text.find("expired") != std::string::npos);

  RenderInputs missing = inputs_for(features, nullptr, &upstream);
  CHECK_THROWS_AS(render_prompt(find_agent_spec(specs, "validation"), missing),
                  MissingDependencyError);

  AgentSpec leaky{"leaky", "mission", {{"ACTUAL OUTCOME", "actual_outcome"}}, OutputContract::free_text, "m"};
  RenderInputs leak = inputs_for(features);
  leak.actual_outcome = record.outcome;
  CHECK_THROWS_AS(render_prompt(leaky, leak), ConfigError);
}

TEST_CASE("token budget shrinks sections in stages and never overflows") {
  auto record = testing::make_patient("77", 0.5, true);
  record.notes.clear();
  for (int i = 0; i < 3; ++i) {
    record.notes.push_back({AuthorRole::physician, 100 + i, std::string(3000, 'x') + " end."});
  }
  for (int i = 0; i < 20; ++i) {
    record.medications.push_back({"medication_name_" + std::to_string(i), 50, "10 mg every 6 hours iv"});
  }
  for (int i = 0; i < 60; ++i) {
    record.labs.push_back({"lab_measure_" + std::to_string(i), 1.0 + i, "mmol/L", 60 + i});
  }
  const auto features = extract_features(record);
  const auto specs = default_agent_specs("m");
  const auto& spec = find_agent_spec(specs, "sas_all_in_one");
  const auto exemplars = build_few_shot(testing::make_pool(2, 2));

  RenderInputs inputs = inputs_for(features, &exemplars);
  inputs.token_budget = 100000;
  const auto full = render_prompt(spec, inputs);
  const std::size_t system_tokens = token_estimate(full.system_text);
  const std::size_t full_tokens = system_tokens + token_estimate(full.user_text);
  CHECK(full.user_text.find(std::string(3000, 'x')) != std::string::npos);

  bool saw_note_cap = false;
  bool saw_meds_omitted = false;
  bool saw_labs_omitted = false;
  bool saw_hard_truncation = false;
  // Descend through every shrink threshold; the per-channel payload sizes
  // above keep each stage's window far wider than the step.
  for (std::size_t budget = full_tokens + 50; budget > system_tokens + 5; budget -= 25) {
    inputs.token_budget = budget;
    const auto prompt = render_prompt(spec, inputs);
    CHECK(system_tokens + token_estimate(prompt.user_text) <= budget);

    const bool notes_capped = prompt.user_text.find(std::string(601, 'x')) == std::string::npos;
    const bool meds_omitted =
        prompt.user_text.find("MEDICATIONS\nOMITTED FOR LENGTH") != std::string::npos;
    const bool labs_omitted =
        prompt.user_text.find("LABORATORY RESULTS\nOMITTED FOR LENGTH") != std::string::npos;
    const bool hard_truncated =
        prompt.user_text.size() >= 11 &&
        prompt.user_text.compare(prompt.user_text.size() - 11, 11, "[truncated]") == 0;

    // Stage order below holds whenever the whole staged render survived: the
    // last-resort tail cut can remove later sections' markers.
    if (!hard_truncated) {
      if (meds_omitted) CHECK(notes_capped);
      if (labs_omitted) CHECK(meds_omitted);
      CHECK(prompt.user_text.find("VITAL SIGNS\n") != std::string::npos);
      CHECK(prompt.user_text.find("APACHE_PREDICTED_MORTALITY:") != std::string::npos);
      saw_meds_omitted = saw_meds_omitted || meds_omitted;
      saw_labs_omitted = saw_labs_omitted || labs_omitted;
    }
    saw_note_cap = saw_note_cap || notes_capped;
    saw_hard_truncation = saw_hard_truncation || hard_truncated;
  }
  CHECK(saw_note_cap);
  CHECK(saw_meds_omitted);
  CHECK(saw_labs_omitted);
  CHECK(saw_hard_truncation);
}

TEST_CASE("budget too small for the system text is rejected") {
  const auto specs = default_agent_specs("m");
  const auto features = extract_features(testing::make_patient("77", 0.5, true));
  RenderInputs inputs = inputs_for(features);
  inputs.token_budget = 10;
  CHECK_THROWS_AS(render_prompt(find_agent_spec(specs, "lab_analysis"), inputs), ConfigError);
}

TEST_CASE("standalone truncation cuts at whitespace and marks the cut") {
  const std::string fits(40, 'a');
  CHECK(truncate_to_budget(fits, 10) == fits);

  const std::string longer = "alpha beta gamma delta epsilon zeta eta theta iota kappa";
  const auto cut = truncate_to_budget(longer, 10);
  REQUIRE(cut.size() >= 11);
  CHECK(cut.compare(cut.size() - 11, 11, "[truncated]") == 0);
  const auto content = cut.substr(0, cut.size() - 11);
  CHECK(content.size() <= 40);
  CHECK(longer.compare(0, content.size(), content) == 0);
  CHECK_THROWS_AS(truncate_to_budget(longer, 0), ConfigError);
}
