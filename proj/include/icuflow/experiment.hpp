#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vendor/json.hpp"

#include "icuflow/evaluation.hpp"
#include "icuflow/orchestrator.hpp"
#include "icuflow/provider.hpp"
#include "icuflow/schema.hpp"
#include "icuflow/transparency.hpp"

namespace icuflow {

struct ProviderSettings {
  std::string kind = "mock";  // mock | http
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model_id = "gpt-4o";
  std::size_t max_in_flight = 8;
};

struct ExperimentConfig {
  std::string data_dir;
  SchemaConfig schema = default_schema();
  std::size_t n_expired = 76;
  std::size_t n_survived = 74;
  std::uint64_t seed = 7;
  std::string graph = "mas";  // mas | sas
  ProviderSettings provider;
  RetryPolicy retry;
  std::size_t max_parallel = 4;
  std::size_t token_budget = 10000;
  double classification_threshold = 0.5;
  std::string rubric_file;  // empty -> built-in default
  std::string output_dir = "runs";
};

// Throws ConfigError describing the first violated constraint.
void validate_config(const ExperimentConfig& config);

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config_file(const std::filesystem::path& path);

// Constructs the configured backend. Misconfiguration (unknown kind, missing
// API key variable) surfaces as a fatal ProviderError before any run starts.
std::unique_ptr<Provider> make_provider(const ProviderSettings& settings, std::uint64_t seed);

struct ExperimentRunResult {
  std::filesystem::path run_dir;
  std::uint64_t run_seed = 0;
  RunMetrics metrics;
  BatchSummary summary;
};

// Executes `runs` repetitions with seeds seed, seed+1, ... Each repetition
// samples its own balanced cohort (shared across models for the same seed),
// runs the batch, and persists under output_dir/<timestamp>_seed<k>/<label>/:
// one JSON record per stay plus summary.json and metrics.json. Few-shot
// exemplar stays are chosen once from the full pool and excluded from every
// evaluation cohort.
std::vector<ExperimentRunResult> run_experiment(const ExperimentConfig& config, std::size_t runs);

// Finds every run directory under the two roots (a run directory is a
// <label>/ directory holding per-stay records), loads the records, recomputes
// per-run metrics at the given threshold, sorts runs by seed, and compares.
ComparisonReport compare_run_dirs(const std::filesystem::path& mas_root,
                                  const std::filesystem::path& sas_root, double threshold);

// Re-scores transparency on persisted records with a new rubric, rewriting
// each record and its run's metrics.json. Returns the number of records
// rescored.
std::size_t rescore_runs(const std::filesystem::path& root, const Rubric& rubric, double threshold);

}  // namespace icuflow
