#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vendor/json.hpp"

#include "icuflow/agents.hpp"
#include "icuflow/patient.hpp"
#include "icuflow/prediction.hpp"
#include "icuflow/provider.hpp"
#include "icuflow/transparency.hpp"

namespace icuflow {

struct TaskNode {
  std::string id;
  std::set<std::string> depends_on;
};

enum class GraphLabel { mas, sas, custom };

std::string to_string(GraphLabel label);
GraphLabel graph_label_from_string(const std::string& text);

struct PipelineGraph {
  std::vector<TaskNode> nodes;
  GraphLabel label = GraphLabel::custom;
};

// Layered topological order: layer k nodes depend only on layers < k. Nodes
// within a layer are sorted by id. Throws CycleError (listing one cycle),
// UnknownDependencyError, or GraphError (empty graph, duplicate id,
// self-dependency).
std::vector<std::vector<std::string>> validate_dag(const PipelineGraph& graph);

// The seven-node pipeline: three parallel analyses feeding integration, then
// prediction, transparency, validation in sequence.
PipelineGraph build_mas_graph();

// The single-node variant: one agent sees the whole feature bundle.
PipelineGraph build_sas_graph();

struct TaskEntry {
  std::string agent;
  std::string system_text;
  std::string user_text;
  std::string response_text;
  std::size_t attempts = 1;
  std::size_t input_token_estimate = 0;
  std::size_t output_token_estimate = 0;
  std::int64_t started_ns = 0;   // steady clock, run-relative ordering only
  std::int64_t finished_ns = 0;
};

// Write-once blackboard shared by one patient's tasks. A second write to the
// same key is a hard error; it must be unreachable through a validated graph.
class SharedMemory {
 public:
  void write(const std::string& key, TaskEntry entry);
  bool contains(const std::string& key) const;
  TaskEntry at(const std::string& key) const;
  std::map<std::string, TaskEntry> entries() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, TaskEntry> entries_;
};

struct DagFailure {
  std::string node;
  std::string message;
};

// Executes the graph layer by layer; nodes within a layer run concurrently.
// The worker receives the node id and its dependencies' response texts, and
// its returned entry is stamped with start/finish times and published to
// memory. On a node failure the current layer finishes, no further layer
// starts, and the first failure (in layer order) is returned.
std::optional<DagFailure> run_dag(
    const PipelineGraph& graph, SharedMemory& memory,
    const std::function<TaskEntry(const std::string& node,
                                  const std::map<std::string, std::string>& upstream)>& worker);

struct RunRecord {
  std::string stay_id;
  GraphLabel label = GraphLabel::custom;
  std::uint64_t seed = 0;
  std::string timestamp_utc;
  bool success = false;
  std::string failed_agent;    // empty on success
  std::string failure_reason;  // empty on success
  std::map<std::string, TaskEntry> tasks;
  std::optional<PredictionOutcome> prediction;
  std::optional<TransparencyReport> transparency;
  // Recorded outcome, carried so metrics can be recomputed offline from disk.
  OutcomeLabel actual;
  std::map<std::string, std::string> model_ids;
};

struct ExecuteOptions {
  std::vector<AgentSpec> agent_specs;
  std::vector<FewShotExemplar> exemplars;
  RetryPolicy retry;
  std::size_t token_budget = 10000;
  double classification_threshold = 0.5;
  const Rubric* rubric = nullptr;  // null -> built-in default
  std::uint64_t seed = 0;
  std::size_t max_output_tokens = 1024;
  double temperature = 0.0;
};

// Runs one patient through the graph. Prediction-contract outputs are parsed
// immediately; a parse failure triggers exactly one re-ask with an appended
// format reminder before the node fails. Node failures yield a failed record
// holding the entries that did complete; this function only throws for
// invalid configuration (bad graph, unknown agent spec).
RunRecord execute(const PipelineGraph& graph, const PatientRecord& patient, Provider& backend,
                  const ExecuteOptions& options);

struct BatchFailure {
  std::string stay_id;
  std::string agent;
  std::string reason;
};

struct BatchSummary {
  std::size_t n_patients = 0;
  std::size_t n_success = 0;
  std::size_t n_failed = 0;
  double wall_seconds = 0.0;
  std::vector<BatchFailure> failures;
};

nlohmann::ordered_json batch_summary_to_json(const BatchSummary& summary);

struct BatchResult {
  std::vector<RunRecord> records;  // cohort order
  BatchSummary summary;
};

// Runs every patient, at most max_parallel in flight; per-patient failures
// are isolated and reported in the summary.
BatchResult run_batch(const std::vector<PatientRecord>& cohort, const PipelineGraph& graph,
                      Provider& backend, const ExecuteOptions& options, std::size_t max_parallel);

nlohmann::ordered_json run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& doc);

void save_run_record(const std::filesystem::path& dir, const RunRecord& record);
RunRecord load_run_record(const std::filesystem::path& path);

}  // namespace icuflow
