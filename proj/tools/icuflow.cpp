#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "vendor/CLI11.hpp"

#include "icuflow/errors.hpp"
#include "icuflow/evaluation.hpp"
#include "icuflow/experiment.hpp"
#include "icuflow/synthetic.hpp"
#include "icuflow/transparency.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProvider = 3;

struct RunFlags {
  std::string config_file;
  std::string data_dir;
  std::string graph;
  std::string provider_kind;
  std::string model_id;
  std::string base_url;
  std::string api_key_env;
  std::string rubric_file;
  std::string output_dir;
  std::size_t runs = 8;
  std::uint64_t seed = 0;
  std::size_t n_expired = 0;
  std::size_t n_survived = 0;
  std::size_t max_parallel = 0;
  std::size_t token_budget = 0;
  double threshold = 0.0;
  std::size_t max_attempts = 0;
};

int run_command(const RunFlags& flags, const CLI::App& cmd) {
  icuflow::ExperimentConfig config;
  if (!flags.config_file.empty()) config = icuflow::load_config_file(flags.config_file);

  // Flags override config-file values; unset flags leave the file values.
  if (cmd.count("--data-dir") > 0) config.data_dir = flags.data_dir;
  if (cmd.count("--graph") > 0) config.graph = flags.graph;
  if (cmd.count("--seed") > 0) config.seed = flags.seed;
  if (cmd.count("--n-expired") > 0) config.n_expired = flags.n_expired;
  if (cmd.count("--n-survived") > 0) config.n_survived = flags.n_survived;
  if (cmd.count("--provider") > 0) config.provider.kind = flags.provider_kind;
  if (cmd.count("--model") > 0) config.provider.model_id = flags.model_id;
  if (cmd.count("--base-url") > 0) config.provider.base_url = flags.base_url;
  if (cmd.count("--api-key-env") > 0) config.provider.api_key_env = flags.api_key_env;
  if (cmd.count("--max-parallel") > 0) config.max_parallel = flags.max_parallel;
  if (cmd.count("--token-budget") > 0) config.token_budget = flags.token_budget;
  if (cmd.count("--threshold") > 0) config.classification_threshold = flags.threshold;
  if (cmd.count("--rubric") > 0) config.rubric_file = flags.rubric_file;
  if (cmd.count("--out") > 0) config.output_dir = flags.output_dir;
  if (cmd.count("--max-attempts") > 0) config.retry.max_attempts = flags.max_attempts;

  const auto results = icuflow::run_experiment(config, flags.runs);
  for (const auto& result : results) {
    std::printf("run seed=%llu dir=%s success=%zu failed=%zu accuracy=%.1f mae=%.2f rmse=%.2f transparency=%.1f\n",
                static_cast<unsigned long long>(result.run_seed), result.run_dir.c_str(),
                result.summary.n_success, result.summary.n_failed,
                result.metrics.accuracy_percent, result.metrics.los_mae_days,
                result.metrics.los_rmse_days, result.metrics.mean_transparency);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cohort experiment runner: multi-agent vs single-agent ICU outcome pipelines"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic eICU-shaped fixture cohort");
  std::uint64_t synth_seed = 7;
  std::size_t synth_n = 170;
  double synth_fraction = 0.5;
  std::string synth_out;
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--n", synth_n, "Number of stays");
  synth->add_option("--expired-fraction", synth_fraction, "Fraction of expired stays");
  synth->add_option("--out", synth_out, "Output directory")->required();

  // run
  auto* run = app.add_subcommand("run", "Execute repeated cohort runs through a pipeline graph");
  RunFlags flags;
  run->add_option("--config", flags.config_file, "JSON config file (flags override its values)");
  run->add_option("--data-dir", flags.data_dir, "Cohort CSV directory");
  run->add_option("--graph", flags.graph, "Pipeline graph: mas or sas");
  run->add_option("--runs", flags.runs, "Repetitions (seeds seed, seed+1, ...)");
  run->add_option("--seed", flags.seed, "Base seed");
  run->add_option("--n-expired", flags.n_expired, "Expired stays per cohort sample");
  run->add_option("--n-survived", flags.n_survived, "Survived stays per cohort sample");
  run->add_option("--provider", flags.provider_kind, "Backend: mock or http");
  run->add_option("--model", flags.model_id, "Model id for every agent");
  run->add_option("--base-url", flags.base_url, "Chat-completions base URL (http backend)");
  run->add_option("--api-key-env", flags.api_key_env, "Environment variable holding the API key");
  run->add_option("--max-parallel", flags.max_parallel, "Patients in flight at once");
  run->add_option("--token-budget", flags.token_budget, "Per-prompt token budget");
  run->add_option("--threshold", flags.threshold, "Mortality classification threshold");
  run->add_option("--rubric", flags.rubric_file, "Transparency rubric JSON file");
  run->add_option("--out", flags.output_dir, "Output directory for run records");
  run->add_option("--max-attempts", flags.max_attempts, "Provider retry attempts");

  // compare
  auto* compare = app.add_subcommand("compare", "Compare persisted mas and sas runs");
  std::string mas_dir;
  std::string sas_dir;
  std::string format_text = "markdown";
  std::string compare_out;
  double compare_threshold = 0.5;
  compare->add_option("--mas", mas_dir, "Directory holding mas runs")->required();
  compare->add_option("--sas", sas_dir, "Directory holding sas runs")->required();
  compare->add_option("--format", format_text, "Report format: json, csv, or markdown");
  compare->add_option("--threshold", compare_threshold, "Mortality classification threshold");
  compare->add_option("--out", compare_out, "Write the report here instead of stdout");

  // score
  auto* score = app.add_subcommand("score", "Re-score transparency on persisted records");
  std::string score_root;
  std::string score_rubric;
  double score_threshold = 0.5;
  score->add_option("--runs-dir", score_root, "Directory holding persisted runs")->required();
  score->add_option("--rubric", score_rubric, "Rubric JSON file (defaults to the built-in rubric)");
  score->add_option("--threshold", score_threshold, "Mortality classification threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) {
      icuflow::SyntheticOptions options;
      options.seed = synth_seed;
      options.n_stays = synth_n;
      options.expired_fraction = synth_fraction;
      icuflow::generate_synthetic(synth_out, options);
      for (const auto& name : icuflow::synthetic_file_names()) {
        std::printf("wrote %s/%s\n", synth_out.c_str(), name.c_str());
      }
      return kExitOk;
    }
    if (run->parsed()) {
      return run_command(flags, *run);
    }
    if (compare->parsed()) {
      const auto report =
          icuflow::compare_run_dirs(mas_dir, sas_dir, compare_threshold);
      const std::string document =
          icuflow::emit_report(report, icuflow::report_format_from_string(format_text));
      if (compare_out.empty()) {
        std::fputs(document.c_str(), stdout);
      } else {
        std::ofstream out(compare_out);
        if (!out) throw icuflow::IoError("cannot write report: " + compare_out);
        out << document;
        std::printf("wrote %s\n", compare_out.c_str());
      }
      return kExitOk;
    }
    if (score->parsed()) {
      const icuflow::Rubric rubric = score_rubric.empty() ? icuflow::default_rubric()
                                                          : icuflow::load_rubric_file(score_rubric);
      const std::size_t rescored = icuflow::rescore_runs(score_root, rubric, score_threshold);
      std::printf("rescored %zu records under %s\n", rescored, score_root.c_str());
      return kExitOk;
    }
  } catch (const icuflow::ProviderError& err) {
    std::fprintf(stderr, "provider error: %s\n", err.what());
    return kExitProvider;
  } catch (const icuflow::ConfigError& err) {
    std::fprintf(stderr, "configuration error: %s\n", err.what());
    return kExitUsage;
  } catch (const icuflow::Error& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitData;
  }
  return kExitUsage;
}
