#include "icuflow/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <thread>

#include "icuflow/errors.hpp"
#include "icuflow/ingestion.hpp"

namespace icuflow {
namespace {

std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return std::string(buf);
}

// Walks unsatisfied dependencies from a stuck node until one repeats, which
// must happen inside a cycle.
std::string describe_cycle(const std::map<std::string, const TaskNode*>& remaining) {
  std::vector<std::string> path;
  std::set<std::string> seen;
  std::string current = remaining.begin()->first;
  while (seen.insert(current).second) {
    path.push_back(current);
    const TaskNode* node = remaining.at(current);
    std::string next;
    for (const auto& dep : node->depends_on) {
      if (remaining.count(dep) > 0) {
        next = dep;
        break;
      }
    }
    current = next;
  }
  std::string cycle;
  bool in_cycle = false;
  for (const auto& id : path) {
    if (id == current) in_cycle = true;
    if (in_cycle) cycle += id + " -> ";
  }
  cycle += current;
  return cycle;
}

}  // namespace

std::string to_string(GraphLabel label) {
  switch (label) {
    case GraphLabel::mas: return "mas";
    case GraphLabel::sas: return "sas";
    case GraphLabel::custom: return "custom";
  }
  throw ConfigError("unknown graph label");
}

GraphLabel graph_label_from_string(const std::string& text) {
  if (text == "mas") return GraphLabel::mas;
  if (text == "sas") return GraphLabel::sas;
  if (text == "custom") return GraphLabel::custom;
  throw ConfigError("unknown graph label: " + text);
}

std::vector<std::vector<std::string>> validate_dag(const PipelineGraph& graph) {
  if (graph.nodes.empty()) throw GraphError("graph has no nodes");
  std::map<std::string, const TaskNode*> by_id;
  for (const auto& node : graph.nodes) {
    if (node.id.empty()) throw GraphError("graph node with an empty id");
    if (!by_id.emplace(node.id, &node).second) throw GraphError("duplicate node id: " + node.id);
  }
  for (const auto& node : graph.nodes) {
    for (const auto& dep : node.depends_on) {
      if (dep == node.id) throw GraphError("node " + node.id + " depends on itself");
      if (by_id.count(dep) == 0) {
        throw UnknownDependencyError("node " + node.id + " depends on unknown node " + dep);
      }
    }
  }

  std::vector<std::vector<std::string>> layers;
  std::set<std::string> satisfied;
  std::map<std::string, const TaskNode*> remaining = by_id;
  while (!remaining.empty()) {
    std::vector<std::string> layer;
    for (const auto& [id, node] : remaining) {
      const bool ready = std::all_of(node->depends_on.begin(), node->depends_on.end(),
                                     [&](const std::string& dep) { return satisfied.count(dep) > 0; });
      if (ready) layer.push_back(id);
    }
    if (layer.empty()) throw CycleError("dependency cycle: " + describe_cycle(remaining));
    for (const auto& id : layer) {
      satisfied.insert(id);
      remaining.erase(id);
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

PipelineGraph build_mas_graph() {
  PipelineGraph graph;
  graph.label = GraphLabel::mas;
  graph.nodes = {
      {"lab_analysis", {}},
      {"vitals_analysis", {}},
      {"context_analysis", {}},
      {"integration", {"lab_analysis", "vitals_analysis", "context_analysis"}},
      {"prediction", {"integration"}},
      {"transparency", {"prediction"}},
      {"validation", {"transparency"}},
  };
  return graph;
}

PipelineGraph build_sas_graph() {
  PipelineGraph graph;
  graph.label = GraphLabel::sas;
  graph.nodes = {{"sas_all_in_one", {}}};
  return graph;
}

void SharedMemory::write(const std::string& key, TaskEntry entry) {
  std::lock_guard<std::mutex> lock(mutex_);
  if (entries_.count(key) > 0) throw WriteOnceError("second write to shared-memory key " + key);
  entries_.emplace(key, std::move(entry));
}

bool SharedMemory::contains(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.count(key) > 0;
}

TaskEntry SharedMemory::at(const std::string& key) const {
  std::lock_guard<std::mutex> lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw GraphError("no shared-memory entry for " + key);
  return it->second;
}

std::map<std::string, TaskEntry> SharedMemory::entries() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_;
}

std::optional<DagFailure> run_dag(
    const PipelineGraph& graph, SharedMemory& memory,
    const std::function<TaskEntry(const std::string&, const std::map<std::string, std::string>&)>&
        worker) {
  const auto layers = validate_dag(graph);

  for (const auto& layer : layers) {
    // Blackboard snapshot: every entry published by earlier layers is
    // readable; depends_on only constrains ordering.
    std::map<std::string, std::string> upstream;
    for (const auto& [id, entry] : memory.entries()) upstream[id] = entry.response_text;

    struct Slot {
      TaskEntry entry;
      std::exception_ptr error;
    };
    std::vector<Slot> slots(layer.size());
    std::vector<std::thread> threads;
    threads.reserve(layer.size());
    for (std::size_t i = 0; i < layer.size(); ++i) {
      const std::string& id = layer[i];
      threads.emplace_back([&worker, &slots, &upstream, i, id]() {
        const std::int64_t started = steady_now_ns();
        try {
          TaskEntry entry = worker(id, upstream);
          entry.agent = id;
          entry.started_ns = started;
          entry.finished_ns = steady_now_ns();
          slots[i].entry = std::move(entry);
        } catch (...) {
          slots[i].error = std::current_exception();
        }
      });
    }
    for (auto& thread : threads) thread.join();

    std::optional<DagFailure> failure;
    for (std::size_t i = 0; i < layer.size(); ++i) {
      if (slots[i].error == nullptr) {
        memory.write(layer[i], std::move(slots[i].entry));
        continue;
      }
      if (failure) continue;
      try {
        std::rethrow_exception(slots[i].error);
      } catch (const std::exception& err) {
        failure = DagFailure{layer[i], err.what()};
      } catch (...) {
        failure = DagFailure{layer[i], "unknown error"};
      }
    }
    if (failure) return failure;
  }
  return std::nullopt;
}

RunRecord execute(const PipelineGraph& graph, const PatientRecord& patient, Provider& backend,
                  const ExecuteOptions& options) {
  validate_dag(graph);
  const FeatureBundle features = extract_features(patient);

  RunRecord record;
  record.stay_id = patient.stay_id;
  record.label = graph.label;
  record.seed = options.seed;
  record.timestamp_utc = utc_timestamp();
  record.actual = patient.outcome;
  for (const auto& node : graph.nodes) {
    record.model_ids[node.id] = find_agent_spec(options.agent_specs, node.id).model_id;
  }

  std::mutex parse_mutex;
  std::optional<PredictionOutcome> parsed;
  std::string prediction_agent;

  SharedMemory memory;
  const auto worker = [&](const std::string& id,
                          const std::map<std::string, std::string>& upstream) -> TaskEntry {
    const AgentSpec& spec = find_agent_spec(options.agent_specs, id);
    RenderInputs inputs;
    inputs.features = &features;
    inputs.upstream = &upstream;
    inputs.exemplars = options.exemplars.empty() ? nullptr : &options.exemplars;
    if (id == "validation") inputs.actual_outcome = patient.outcome;
    inputs.token_budget = options.token_budget;
    const RenderedPrompt prompt = render_prompt(spec, inputs);

    ProviderRequest request;
    request.model_id = spec.model_id;
    request.system_text = prompt.system_text;
    request.user_text = prompt.user_text;
    request.max_output_tokens = options.max_output_tokens;
    request.temperature = options.temperature;

    ProviderResponse response = with_retries(backend, request, options.retry);
    std::size_t attempts = response.attempts_used;

    if (spec.output_contract == OutputContract::prediction_template) {
      PredictionOutcome outcome;
      try {
        outcome = parse_prediction(response.text);
      } catch (const ParseError& first_err) {
        // One re-ask with the contract restated, then the node fails for good.
        ProviderRequest retry_request = request;
        retry_request.user_text += "\n\nFORMAT REMINDER\nYour previous reply could not be parsed (";
        retry_request.user_text += first_err.what();
        retry_request.user_text += "). Respond again and include exactly these lines:\n";
        retry_request.user_text += render_prediction_contract();
        response = with_retries(backend, retry_request, options.retry);
        attempts += response.attempts_used;
        outcome = parse_prediction(response.text);
      }
      std::lock_guard<std::mutex> lock(parse_mutex);
      parsed = std::move(outcome);
      prediction_agent = id;
    }

    TaskEntry entry;
    entry.system_text = prompt.system_text;
    entry.user_text = prompt.user_text;
    entry.response_text = response.text;
    entry.attempts = attempts;
    entry.input_token_estimate = response.input_token_estimate;
    entry.output_token_estimate = response.output_token_estimate;
    return entry;
  };

  const auto failure = run_dag(graph, memory, worker);
  record.tasks = memory.entries();
  record.prediction = parsed;

  if (failure) {
    record.success = false;
    record.failed_agent = failure->node;
    record.failure_reason = failure->message;
    return record;
  }

  bool has_prediction_contract = false;
  for (const auto& node : graph.nodes) {
    if (find_agent_spec(options.agent_specs, node.id).output_contract ==
        OutputContract::prediction_template) {
      has_prediction_contract = true;
    }
  }
  if (has_prediction_contract && !record.prediction) {
    record.success = false;
    record.failure_reason = "prediction output missing after execution";
    return record;
  }

  if (record.prediction) {
    const std::string prediction_text = memory.at(prediction_agent).response_text;
    const std::string explanation_text =
        memory.contains("transparency") ? memory.at("transparency").response_text : std::string();
    const Rubric& rubric = options.rubric != nullptr ? *options.rubric : default_rubric();
    record.transparency = score_transparency(prediction_text, explanation_text, rubric);
  }

  record.success = true;
  return record;
}

nlohmann::ordered_json batch_summary_to_json(const BatchSummary& summary) {
  nlohmann::ordered_json doc;
  doc["n_patients"] = summary.n_patients;
  doc["n_success"] = summary.n_success;
  doc["n_failed"] = summary.n_failed;
  doc["wall_seconds"] = summary.wall_seconds;
  doc["failures"] = nlohmann::ordered_json::array();
  for (const auto& failure : summary.failures) {
    doc["failures"].push_back(
        {{"stay_id", failure.stay_id}, {"agent", failure.agent}, {"reason", failure.reason}});
  }
  return doc;
}

BatchResult run_batch(const std::vector<PatientRecord>& cohort, const PipelineGraph& graph,
                      Provider& backend, const ExecuteOptions& options, std::size_t max_parallel) {
  if (max_parallel == 0) throw ConfigError("max_parallel must be >= 1");
  const auto wall_start = std::chrono::steady_clock::now();

  BatchResult result;
  result.records.resize(cohort.size());
  std::atomic<std::size_t> next{0};

  const auto work = [&]() {
    while (true) {
      const std::size_t index = next.fetch_add(1);
      if (index >= cohort.size()) return;
      const PatientRecord& patient = cohort[index];
      try {
        result.records[index] = execute(graph, patient, backend, options);
      } catch (const std::exception& err) {
        RunRecord failed;
        failed.stay_id = patient.stay_id;
        failed.label = graph.label;
        failed.seed = options.seed;
        failed.timestamp_utc.clear();
        failed.actual = patient.outcome;
        failed.success = false;
        failed.failure_reason = err.what();
        result.records[index] = std::move(failed);
      }
    }
  };

  std::vector<std::thread> workers;
  const std::size_t n_workers = std::min(max_parallel, std::max<std::size_t>(cohort.size(), 1));
  workers.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) workers.emplace_back(work);
  for (auto& worker : workers) worker.join();

  result.summary.n_patients = cohort.size();
  for (const auto& record : result.records) {
    if (record.success) {
      ++result.summary.n_success;
    } else {
      ++result.summary.n_failed;
      result.summary.failures.push_back({record.stay_id, record.failed_agent, record.failure_reason});
    }
  }
  result.summary.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return result;
}

namespace {

nlohmann::ordered_json task_entry_to_json(const TaskEntry& entry) {
  nlohmann::ordered_json doc;
  doc["agent"] = entry.agent;
  doc["system_text"] = entry.system_text;
  doc["user_text"] = entry.user_text;
  doc["response_text"] = entry.response_text;
  doc["attempts"] = entry.attempts;
  doc["input_token_estimate"] = entry.input_token_estimate;
  doc["output_token_estimate"] = entry.output_token_estimate;
  doc["started_ns"] = entry.started_ns;
  doc["finished_ns"] = entry.finished_ns;
  return doc;
}

TaskEntry task_entry_from_json(const nlohmann::json& doc) {
  TaskEntry entry;
  entry.agent = doc.at("agent").get<std::string>();
  entry.system_text = doc.at("system_text").get<std::string>();
  entry.user_text = doc.at("user_text").get<std::string>();
  entry.response_text = doc.at("response_text").get<std::string>();
  entry.attempts = doc.at("attempts").get<std::size_t>();
  entry.input_token_estimate = doc.at("input_token_estimate").get<std::size_t>();
  entry.output_token_estimate = doc.at("output_token_estimate").get<std::size_t>();
  entry.started_ns = doc.at("started_ns").get<std::int64_t>();
  entry.finished_ns = doc.at("finished_ns").get<std::int64_t>();
  return entry;
}

}  // namespace

nlohmann::ordered_json run_record_to_json(const RunRecord& record) {
  nlohmann::ordered_json doc;
  doc["stay_id"] = record.stay_id;
  doc["graph_label"] = to_string(record.label);
  doc["seed"] = record.seed;
  doc["timestamp_utc"] = record.timestamp_utc;
  doc["success"] = record.success;
  doc["failed_agent"] = record.failed_agent;
  doc["failure_reason"] = record.failure_reason;
  doc["actual"] = {{"status", to_string(record.actual.status)},
                   {"los_days", record.actual.actual_los_days}};
  doc["model_ids"] = nlohmann::ordered_json::object();
  for (const auto& [agent, model] : record.model_ids) doc["model_ids"][agent] = model;
  doc["tasks"] = nlohmann::ordered_json::object();
  for (const auto& [agent, entry] : record.tasks) doc["tasks"][agent] = task_entry_to_json(entry);
  if (record.prediction) {
    const auto& p = *record.prediction;
    doc["prediction"] = {{"mortality_probability", p.mortality_probability},
                         {"predicted_los_days", p.predicted_los_days},
                         {"confidence", to_string(p.confidence)},
                         {"key_factors", p.key_factors},
                         {"raw_text", p.raw_text}};
  } else {
    doc["prediction"] = nullptr;
  }
  doc["transparency"] = record.transparency ? report_to_json(*record.transparency)
                                            : nlohmann::ordered_json(nullptr);
  return doc;
}

RunRecord run_record_from_json(const nlohmann::json& doc) {
  RunRecord record;
  record.stay_id = doc.at("stay_id").get<std::string>();
  record.label = graph_label_from_string(doc.at("graph_label").get<std::string>());
  record.seed = doc.at("seed").get<std::uint64_t>();
  record.timestamp_utc = doc.at("timestamp_utc").get<std::string>();
  record.success = doc.at("success").get<bool>();
  record.failed_agent = doc.at("failed_agent").get<std::string>();
  record.failure_reason = doc.at("failure_reason").get<std::string>();
  record.actual.status = outcome_status_from_string(doc.at("actual").at("status").get<std::string>());
  record.actual.actual_los_days = doc.at("actual").at("los_days").get<double>();
  for (const auto& [agent, model] : doc.at("model_ids").items()) {
    record.model_ids[agent] = model.get<std::string>();
  }
  for (const auto& [agent, entry] : doc.at("tasks").items()) {
    record.tasks[agent] = task_entry_from_json(entry);
  }
  if (!doc.at("prediction").is_null()) {
    const auto& p = doc.at("prediction");
    PredictionOutcome outcome;
    outcome.mortality_probability = p.at("mortality_probability").get<double>();
    outcome.predicted_los_days = p.at("predicted_los_days").get<double>();
    outcome.confidence = confidence_from_string(p.at("confidence").get<std::string>());
    for (const auto& factor : p.at("key_factors")) outcome.key_factors.push_back(factor.get<std::string>());
    outcome.raw_text = p.at("raw_text").get<std::string>();
    record.prediction = std::move(outcome);
  }
  if (!doc.at("transparency").is_null()) {
    record.transparency = report_from_json(doc.at("transparency"));
  }
  return record;
}

void save_run_record(const std::filesystem::path& dir, const RunRecord& record) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (record.stay_id + ".json");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write run record: " + path.string());
  out << run_record_to_json(record).dump(2) << "\n";
}

RunRecord load_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run record: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& err) {
    throw IoError("run record " + path.string() + " is not valid JSON: " + err.what());
  }
  return run_record_from_json(doc);
}

}  // namespace icuflow
