#include "icuflow/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include "icuflow/errors.hpp"
#include "icuflow/http_provider.hpp"
#include "icuflow/ingestion.hpp"
#include "icuflow/mock_provider.hpp"

namespace icuflow {
namespace {

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return std::string(buf);
}

void write_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

bool is_record_file(const std::filesystem::directory_entry& entry) {
  if (!entry.is_regular_file()) return false;
  const auto name = entry.path().filename().string();
  return name.size() > 5 && name.substr(name.size() - 5) == ".json" && name != "summary.json" &&
         name != "metrics.json";
}

struct LoadedRun {
  std::filesystem::path dir;
  std::uint64_t seed = 0;
  std::vector<RunRecord> records;
};

std::vector<LoadedRun> load_runs(const std::filesystem::path& root, GraphLabel label) {
  if (!std::filesystem::exists(root)) throw IoError("run directory does not exist: " + root.string());
  const std::string label_name = to_string(label);

  std::vector<std::filesystem::path> run_dirs;
  if (root.filename().string() == label_name) run_dirs.push_back(root);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string() == label_name) {
      run_dirs.push_back(entry.path());
    }
  }

  std::vector<LoadedRun> runs;
  for (const auto& dir : run_dirs) {
    LoadedRun run;
    run.dir = dir;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!is_record_file(entry)) continue;
      run.records.push_back(load_run_record(entry.path()));
    }
    if (run.records.empty()) continue;
    std::sort(run.records.begin(), run.records.end(),
              [](const RunRecord& a, const RunRecord& b) { return a.stay_id < b.stay_id; });
    run.seed = run.records.front().seed;
    runs.push_back(std::move(run));
  }
  if (runs.empty()) {
    throw IoError("no " + label_name + " run records found under " + root.string());
  }
  std::sort(runs.begin(), runs.end(), [](const LoadedRun& a, const LoadedRun& b) {
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.dir.string() < b.dir.string();
  });
  return runs;
}

}  // namespace

void validate_config(const ExperimentConfig& config) {
  if (config.data_dir.empty()) throw ConfigError("data_dir must be set");
  if (config.n_expired + config.n_survived == 0) throw ConfigError("cohort size must be positive");
  if (config.graph != "mas" && config.graph != "sas") {
    throw ConfigError("graph must be 'mas' or 'sas' (got '" + config.graph + "')");
  }
  if (config.provider.kind != "mock" && config.provider.kind != "http") {
    throw ConfigError("provider kind must be 'mock' or 'http' (got '" + config.provider.kind + "')");
  }
  if (config.provider.model_id.empty()) throw ConfigError("provider model_id must be set");
  if (config.max_parallel == 0) throw ConfigError("max_parallel must be >= 1");
  if (config.token_budget < 1000) throw ConfigError("token_budget must be >= 1000");
  if (config.classification_threshold <= 0.0 || config.classification_threshold >= 1.0) {
    throw ConfigError("classification_threshold must lie in (0, 1)");
  }
  if (config.retry.max_attempts == 0) throw ConfigError("retry max_attempts must be >= 1");
  if (config.retry.backoff_multiplier < 1.0) throw ConfigError("retry backoff_multiplier must be >= 1");
  if (config.output_dir.empty()) throw ConfigError("output_dir must be set");
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  ExperimentConfig config;
  if (doc.contains("data_dir")) config.data_dir = doc.at("data_dir").get<std::string>();
  if (doc.contains("schema")) config.schema = schema_from_json(doc.at("schema"));
  if (doc.contains("n_expired")) config.n_expired = doc.at("n_expired").get<std::size_t>();
  if (doc.contains("n_survived")) config.n_survived = doc.at("n_survived").get<std::size_t>();
  if (doc.contains("seed")) config.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("graph")) config.graph = doc.at("graph").get<std::string>();
  if (doc.contains("provider")) {
    const auto& provider = doc.at("provider");
    if (provider.contains("kind")) config.provider.kind = provider.at("kind").get<std::string>();
    if (provider.contains("base_url")) config.provider.base_url = provider.at("base_url").get<std::string>();
    if (provider.contains("api_key_env")) {
      config.provider.api_key_env = provider.at("api_key_env").get<std::string>();
    }
    if (provider.contains("model_id")) config.provider.model_id = provider.at("model_id").get<std::string>();
    if (provider.contains("max_in_flight")) {
      config.provider.max_in_flight = provider.at("max_in_flight").get<std::size_t>();
    }
  }
  if (doc.contains("retry")) {
    const auto& retry = doc.at("retry");
    if (retry.contains("max_attempts")) config.retry.max_attempts = retry.at("max_attempts").get<std::size_t>();
    if (retry.contains("base_backoff_ms")) {
      config.retry.base_backoff = std::chrono::milliseconds(retry.at("base_backoff_ms").get<std::int64_t>());
    }
    if (retry.contains("backoff_multiplier")) {
      config.retry.backoff_multiplier = retry.at("backoff_multiplier").get<double>();
    }
  }
  if (doc.contains("max_parallel")) config.max_parallel = doc.at("max_parallel").get<std::size_t>();
  if (doc.contains("token_budget")) config.token_budget = doc.at("token_budget").get<std::size_t>();
  if (doc.contains("classification_threshold")) {
    config.classification_threshold = doc.at("classification_threshold").get<double>();
  }
  if (doc.contains("rubric_file")) config.rubric_file = doc.at("rubric_file").get<std::string>();
  if (doc.contains("output_dir")) config.output_dir = doc.at("output_dir").get<std::string>();
  return config;
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json doc;
  doc["data_dir"] = config.data_dir;
  doc["schema"] = schema_to_json(config.schema);
  doc["n_expired"] = config.n_expired;
  doc["n_survived"] = config.n_survived;
  doc["seed"] = config.seed;
  doc["graph"] = config.graph;
  doc["provider"] = {{"kind", config.provider.kind},
                     {"base_url", config.provider.base_url},
                     {"api_key_env", config.provider.api_key_env},
                     {"model_id", config.provider.model_id},
                     {"max_in_flight", config.provider.max_in_flight}};
  doc["retry"] = {{"max_attempts", config.retry.max_attempts},
                  {"base_backoff_ms", config.retry.base_backoff.count()},
                  {"backoff_multiplier", config.retry.backoff_multiplier}};
  doc["max_parallel"] = config.max_parallel;
  doc["token_budget"] = config.token_budget;
  doc["classification_threshold"] = config.classification_threshold;
  doc["rubric_file"] = config.rubric_file;
  doc["output_dir"] = config.output_dir;
  return doc;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + err.what());
  }
  return config_from_json(doc);
}

std::unique_ptr<Provider> make_provider(const ProviderSettings& settings, std::uint64_t seed) {
  try {
    if (settings.kind == "mock") return std::make_unique<MockProvider>(seed);
    if (settings.kind == "http") {
      HttpProviderOptions options;
      options.base_url = settings.base_url;
      options.api_key_env = settings.api_key_env;
      options.max_in_flight = settings.max_in_flight;
      return std::make_unique<HttpProvider>(options);
    }
  } catch (const ConfigError& err) {
    throw ProviderError(err.what(), ErrorClass::fatal);
  }
  throw ProviderError("unknown provider kind: " + settings.kind, ErrorClass::fatal);
}

std::vector<ExperimentRunResult> run_experiment(const ExperimentConfig& config, std::size_t runs) {
  validate_config(config);
  if (runs == 0) throw ConfigError("runs must be >= 1");

  const Rubric rubric =
      config.rubric_file.empty() ? default_rubric() : load_rubric_file(config.rubric_file);

  const std::vector<PatientRecord> pool = load_cohort(config.data_dir, config.schema);
  const std::vector<FewShotExemplar> exemplars = build_few_shot(pool);
  std::set<std::string> exemplar_ids;
  for (const auto& exemplar : exemplars) exemplar_ids.insert(exemplar.stay_id);
  std::vector<PatientRecord> sampling_pool;
  sampling_pool.reserve(pool.size());
  for (const auto& record : pool) {
    if (exemplar_ids.count(record.stay_id) == 0) sampling_pool.push_back(record);
  }

  const GraphLabel label = graph_label_from_string(config.graph);
  const PipelineGraph graph = label == GraphLabel::mas ? build_mas_graph() : build_sas_graph();
  const std::vector<AgentSpec> specs = default_agent_specs(config.provider.model_id);

  const std::string stamp = utc_stamp();
  std::vector<ExperimentRunResult> results;
  for (std::size_t k = 0; k < runs; ++k) {
    const std::uint64_t run_seed = config.seed + k;
    const std::vector<PatientRecord> cohort =
        sample_balanced(sampling_pool, config.n_expired, config.n_survived, run_seed);

    const auto backend = make_provider(config.provider, run_seed);

    ExecuteOptions options;
    options.agent_specs = specs;
    options.exemplars = exemplars;
    options.retry = config.retry;
    options.token_budget = config.token_budget;
    options.classification_threshold = config.classification_threshold;
    options.rubric = &rubric;
    options.seed = run_seed;

    const BatchResult batch = run_batch(cohort, graph, *backend, options, config.max_parallel);

    const std::filesystem::path run_dir = std::filesystem::path(config.output_dir) /
                                          (stamp + "_seed" + std::to_string(run_seed)) /
                                          to_string(label);
    std::filesystem::create_directories(run_dir);
    for (const auto& record : batch.records) save_run_record(run_dir, record);
    write_json_file(run_dir / "summary.json", batch_summary_to_json(batch.summary));

    ExperimentRunResult result;
    result.run_dir = run_dir;
    result.run_seed = run_seed;
    result.summary = batch.summary;
    result.metrics = metrics_from_records(batch.records, config.classification_threshold);
    write_json_file(run_dir / "metrics.json", run_metrics_to_json(result.metrics));
    results.push_back(std::move(result));
  }
  return results;
}

ComparisonReport compare_run_dirs(const std::filesystem::path& mas_root,
                                  const std::filesystem::path& sas_root, double threshold) {
  const auto mas_runs = load_runs(mas_root, GraphLabel::mas);
  const auto sas_runs = load_runs(sas_root, GraphLabel::sas);
  if (mas_runs.size() != sas_runs.size()) {
    throw PairingError("run counts differ: " + std::to_string(mas_runs.size()) + " mas vs " +
                       std::to_string(sas_runs.size()) + " sas");
  }
  std::vector<RunMetrics> mas_metrics;
  std::vector<RunMetrics> sas_metrics;
  for (const auto& run : mas_runs) mas_metrics.push_back(metrics_from_records(run.records, threshold));
  for (const auto& run : sas_runs) sas_metrics.push_back(metrics_from_records(run.records, threshold));
  return compare_models(mas_metrics, sas_metrics);
}

std::size_t rescore_runs(const std::filesystem::path& root, const Rubric& rubric, double threshold) {
  validate_rubric(rubric);
  if (!std::filesystem::exists(root)) throw IoError("run directory does not exist: " + root.string());

  std::set<std::filesystem::path> run_dirs;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (is_record_file(entry)) run_dirs.insert(entry.path().parent_path());
  }
  if (std::filesystem::is_regular_file(root / "metrics.json")) run_dirs.insert(root);

  std::size_t rescored = 0;
  for (const auto& dir : run_dirs) {
    std::vector<RunRecord> records;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!is_record_file(entry)) continue;
      RunRecord record = load_run_record(entry.path());
      if (record.success && record.prediction) {
        const std::string explanation = record.tasks.count("transparency") > 0
                                            ? record.tasks.at("transparency").response_text
                                            : std::string();
        record.transparency =
            score_transparency(record.prediction->raw_text, explanation, rubric);
        save_run_record(dir, record);
        ++rescored;
      }
      records.push_back(std::move(record));
    }
    if (!records.empty()) {
      try {
        write_json_file(dir / "metrics.json", run_metrics_to_json(metrics_from_records(records, threshold)));
      } catch (const Error&) {
        // A directory holding only failed records keeps its previous metrics.
      }
    }
  }
  return rescored;
}

}  // namespace icuflow
