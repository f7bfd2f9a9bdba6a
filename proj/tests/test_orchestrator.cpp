#include <algorithm>
#include <memory>

#include "vendor/doctest.h"

#include "icuflow/ingestion.hpp"
#include "icuflow/mock_provider.hpp"
#include "icuflow/orchestrator.hpp"

#include "support.hpp"

using namespace icuflow;

namespace {

ExecuteOptions mock_options(std::uint64_t seed = 7) {
  ExecuteOptions options;
  options.agent_specs = default_agent_specs("mock-model");
  options.exemplars = build_few_shot(testing::make_pool(2, 2));
  options.retry.base_backoff = std::chrono::milliseconds(0);
  options.seed = seed;
  return options;
}

TaskEntry trivial_entry(const std::string& text) {
  TaskEntry entry;
  entry.response_text = text;
  return entry;
}

}  // namespace

TEST_CASE("pipeline graph layers three analyses ahead of the sequential tail") {
  const auto graph = build_mas_graph();
  REQUIRE(graph.nodes.size() == 7);
  std::size_t edges = 0;
  for (const auto& node : graph.nodes) edges += node.depends_on.size();
  CHECK(edges == 6);

  const auto layers = validate_dag(graph);
  REQUIRE(layers.size() == 5);
  CHECK(layers[0] == std::vector<std::string>{"context_analysis", "lab_analysis", "vitals_analysis"});
  CHECK(layers[1] == std::vector<std::string>{"integration"});
  CHECK(layers[2] == std::vector<std::string>{"prediction"});
  CHECK(layers[3] == std::vector<std::string>{"transparency"});
  CHECK(layers[4] == std::vector<std::string>{"validation"});
}

TEST_CASE("single-node graph has one layer and no dependencies") {
  const auto graph = build_sas_graph();
  REQUIRE(graph.nodes.size() == 1);
  CHECK(graph.nodes[0].depends_on.empty());
  const auto layers = validate_dag(graph);
  REQUIRE(layers.size() == 1);
  CHECK(layers[0] == std::vector<std::string>{"sas_all_in_one"});
}

TEST_CASE("invalid graphs are rejected with specific errors") {
  PipelineGraph cycle;
  cycle.nodes = {{"a", {"b"}}, {"b", {"a"}}};
  CHECK_THROWS_WITH_AS(validate_dag(cycle), doctest::Contains("dependency cycle"), CycleError);

  PipelineGraph self_dep;
  self_dep.nodes = {{"a", {"a"}}};
  CHECK_THROWS_AS(validate_dag(self_dep), GraphError);

  PipelineGraph duplicate;
  duplicate.nodes = {{"a", {}}, {"a", {}}};
  CHECK_THROWS_AS(validate_dag(duplicate), GraphError);

  PipelineGraph unknown;
  unknown.nodes = {{"a", {"ghost"}}};
  CHECK_THROWS_WITH_AS(validate_dag(unknown), doctest::Contains("ghost"), UnknownDependencyError);

  CHECK_THROWS_AS(validate_dag(PipelineGraph{}), GraphError);
}

TEST_CASE("shared memory is write-once") {
  SharedMemory memory;
  memory.write("lab_analysis", trivial_entry("first"));
  CHECK(memory.contains("lab_analysis"));
  CHECK(memory.at("lab_analysis").response_text == "first");
  CHECK_THROWS_WITH_AS(memory.write("lab_analysis", trivial_entry("second")),
                       doctest::Contains("lab_analysis"), WriteOnceError);
}

TEST_CASE("later layers see every completed entry, not just declared edges") {
  PipelineGraph graph;
  graph.nodes = {{"a", {}}, {"b", {"a"}}, {"c", {"b"}}};
  SharedMemory memory;
  std::map<std::string, std::map<std::string, std::string>> seen;
  const auto failure = run_dag(graph, memory, [&](const std::string& id, const auto& upstream) {
    seen[id] = upstream;
    return trivial_entry("r" + id);
  });
  REQUIRE(!failure.has_value());
  CHECK(seen["a"].empty());
  CHECK(seen["b"] == std::map<std::string, std::string>{{"a", "ra"}});
  CHECK(seen["c"] == std::map<std::string, std::string>{{"a", "ra"}, {"b", "rb"}});
}

TEST_CASE("task start times respect dependency completion") {
  PipelineGraph graph;
  graph.nodes = {{"a", {}}, {"b", {}}, {"c", {"a", "b"}}, {"d", {"c"}}};
  SharedMemory memory;
  const auto failure =
      run_dag(graph, memory, [](const std::string& id, const auto&) { return trivial_entry(id); });
  REQUIRE(!failure.has_value());
  const auto entries = memory.entries();
  for (const auto& node : graph.nodes) {
    for (const auto& dep : node.depends_on) {
      CHECK(entries.at(node.id).started_ns >= entries.at(dep).finished_ns);
    }
  }
}

TEST_CASE("a layer failure stops the run and reports the first failing node") {
  PipelineGraph graph;
  graph.nodes = {{"a1", {}}, {"a2", {}}, {"b", {"a1", "a2"}}};
  SharedMemory memory;
  const auto failure = run_dag(graph, memory, [](const std::string& id, const auto&) -> TaskEntry {
    if (id == "a1" || id == "a2") throw Error("boom in " + id);
    return trivial_entry(id);
  });
  REQUIRE(failure.has_value());
  CHECK(failure->node == "a1");
  CHECK(failure->message == "boom in a1");
  CHECK_FALSE(memory.contains("b"));
}

TEST_CASE("one patient runs the whole pipeline against the mock backend") {
  MockProvider backend(7);
  const auto patient = testing::make_patient("501", 0.85, true);
  const auto record = execute(build_mas_graph(), patient, backend, mock_options());

  REQUIRE(record.success);
  CHECK(record.stay_id == "501");
  CHECK(record.label == GraphLabel::mas);
  CHECK(record.failed_agent.empty());
  REQUIRE(record.tasks.size() == 7);
  for (const auto& [agent, entry] : record.tasks) {
    CHECK(entry.agent == agent);
    CHECK(!entry.response_text.empty());
    CHECK(entry.input_token_estimate > 0);
    CHECK(entry.output_token_estimate > 0);
    CHECK(entry.finished_ns >= entry.started_ns);
  }

  REQUIRE(record.prediction.has_value());
  CHECK(record.prediction->raw_text == record.tasks.at("prediction").response_text);
  CHECK(record.prediction->mortality_probability >= 0.0);
  CHECK(record.prediction->mortality_probability <= 1.0);

  REQUIRE(record.transparency.has_value());
  CHECK(record.transparency->overall >= 0.0);
  CHECK(record.transparency->overall <= 100.0);

  CHECK(record.tasks.at("validation").response_text.find("VERDICT:") != std::string::npos);
  CHECK(record.actual.status == OutcomeStatus::expired);
  CHECK(record.model_ids.at("prediction") == "mock-model");
}

TEST_CASE("a failed agent yields a partial record with completed layers only") {
  auto mock = std::make_shared<MockProvider>(7);
  FaultInjectingProvider backend(
      mock, {{"integration", "", 0, ErrorClass::fatal, "integration offline"}});
  const auto patient = testing::make_patient("502", 0.3, false);
  auto options = mock_options();
  const auto record = execute(build_mas_graph(), patient, backend, options);

  CHECK_FALSE(record.success);
  CHECK(record.failed_agent == "integration");
  CHECK(record.failure_reason == "integration offline");
  CHECK(record.tasks.size() == 3);
  CHECK(record.tasks.count("lab_analysis") == 1);
  CHECK(record.tasks.count("vitals_analysis") == 1);
  CHECK(record.tasks.count("context_analysis") == 1);
  CHECK_FALSE(record.prediction.has_value());
}

TEST_CASE("an unparseable prediction is re-asked once") {
  struct GarbageOnce : Provider {
    MockProvider inner{7};
    bool first = true;
    ProviderResponse complete(const ProviderRequest& request) override {
      if (MockProvider::detect_agent(request.system_text) == "prediction" && first) {
        first = false;
        return {"no structured lines here", 1, 1, 1};
      }
      return inner.complete(request);
    }
    std::string name() const override { return "garbage-once"; }
  } backend;

  const auto record =
      execute(build_mas_graph(), testing::make_patient("503", 0.7, true), backend, mock_options());
  REQUIRE(record.success);
  CHECK(record.tasks.at("prediction").attempts == 2);
  REQUIRE(record.prediction.has_value());
}

TEST_CASE("a permanently unparseable prediction fails the node after one re-ask") {
  struct AlwaysGarbage : Provider {
    MockProvider inner{7};
    ProviderResponse complete(const ProviderRequest& request) override {
      if (MockProvider::detect_agent(request.system_text) == "prediction") {
        return {"still nothing structured", 1, 1, 1};
      }
      return inner.complete(request);
    }
    std::string name() const override { return "always-garbage"; }
  } backend;

  const auto record =
      execute(build_mas_graph(), testing::make_patient("504", 0.7, true), backend, mock_options());
  CHECK_FALSE(record.success);
  CHECK(record.failed_agent == "prediction");
  CHECK(record.failure_reason.find("MORTALITY_PROBABILITY") != std::string::npos);
}

TEST_CASE("batch runs preserve cohort order and isolate failures") {
  const auto cohort = testing::make_pool(3, 3);
  MockProvider backend(11);
  const auto result = run_batch(cohort, build_mas_graph(), backend, mock_options(11), 4);

  REQUIRE(result.records.size() == cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    CHECK(result.records[i].stay_id == cohort[i].stay_id);
  }
  CHECK(result.summary.n_patients == 6);
  CHECK(result.summary.n_success == 6);
  CHECK(result.summary.n_failed == 0);
  CHECK(result.summary.wall_seconds > 0.0);
}

TEST_CASE("parallelism does not change responses") {
  const auto cohort = testing::make_pool(2, 2);
  MockProvider backend(19);
  const auto serial = run_batch(cohort, build_mas_graph(), backend, mock_options(19), 1);
  const auto parallel = run_batch(cohort, build_mas_graph(), backend, mock_options(19), 8);

  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    const auto& a = serial.records[i];
    const auto& b = parallel.records[i];
    REQUIRE(a.tasks.size() == b.tasks.size());
    for (const auto& [agent, entry] : a.tasks) {
      CHECK(entry.response_text == b.tasks.at(agent).response_text);
      CHECK(entry.user_text == b.tasks.at(agent).user_text);
    }
    CHECK(a.prediction->mortality_probability == b.prediction->mortality_probability);
    CHECK(a.transparency->overall == b.transparency->overall);
  }
}

TEST_CASE("a fatal fault in one patient's requests spares the rest of the batch") {
  const auto cohort = testing::make_pool(4, 4);
  auto mock = std::make_shared<MockProvider>(5);
  // The victim's full lab-analysis payload is unique to that patient.
  const auto specs = default_agent_specs("mock-model");
  const auto features = extract_features(cohort[2]);
  RenderInputs inputs;
  inputs.features = &features;
  const auto victim_prompt = render_prompt(find_agent_spec(specs, "lab_analysis"), inputs);

  FaultInjectingProvider backend(
      mock, {{"lab_analysis", victim_prompt.user_text, 0, ErrorClass::fatal, "poisoned"}});
  const auto result = run_batch(cohort, build_mas_graph(), backend, mock_options(5), 3);

  CHECK(result.summary.n_success == 7);
  CHECK(result.summary.n_failed == 1);
  REQUIRE(result.summary.failures.size() == 1);
  CHECK(result.summary.failures[0].stay_id == cohort[2].stay_id);
  CHECK(result.summary.failures[0].agent == "lab_analysis");
}

TEST_CASE("run records round-trip through json, including failures") {
  MockProvider backend(7);
  auto record = execute(build_mas_graph(), testing::make_patient("601", 0.6, true), backend,
                        mock_options());
  record.seed = 41;

  const auto back = run_record_from_json(run_record_to_json(record));
  CHECK(back.stay_id == record.stay_id);
  CHECK(back.label == record.label);
  CHECK(back.seed == 41);
  CHECK(back.success == record.success);
  REQUIRE(back.tasks.size() == record.tasks.size());
  for (const auto& [agent, entry] : record.tasks) {
    CHECK(back.tasks.at(agent).response_text == entry.response_text);
    CHECK(back.tasks.at(agent).attempts == entry.attempts);
    CHECK(back.tasks.at(agent).started_ns == entry.started_ns);
  }
  CHECK(back.prediction->mortality_probability == record.prediction->mortality_probability);
  CHECK(back.prediction->key_factors == record.prediction->key_factors);
  CHECK(back.transparency->overall == record.transparency->overall);
  CHECK(back.actual.status == record.actual.status);
  CHECK(back.actual.actual_los_days == record.actual.actual_los_days);
  CHECK(back.model_ids == record.model_ids);

  RunRecord failed;
  failed.stay_id = "602";
  failed.label = GraphLabel::sas;
  failed.success = false;
  failed.failed_agent = "sas_all_in_one";
  failed.failure_reason = "unreachable";
  const auto failed_back = run_record_from_json(run_record_to_json(failed));
  CHECK_FALSE(failed_back.success);
  CHECK_FALSE(failed_back.prediction.has_value());
  CHECK_FALSE(failed_back.transparency.has_value());
  CHECK(failed_back.failure_reason == "unreachable");
}

TEST_CASE("run records persist to per-stay files") {
  testing::TempDir dir("records");
  MockProvider backend(7);
  const auto record = execute(build_sas_graph(), testing::make_patient("701", 0.2, false), backend,
                              mock_options());
  save_run_record(dir.path(), record);
  const auto loaded = load_run_record(dir.path() / "701.json");
  CHECK(loaded.stay_id == "701");
  CHECK(loaded.label == GraphLabel::sas);
  CHECK(loaded.success);
  REQUIRE(loaded.prediction.has_value());
  CHECK(loaded.prediction->raw_text == record.prediction->raw_text);
}
