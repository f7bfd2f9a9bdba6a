#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vendor/json.hpp"

#include "icuflow/orchestrator.hpp"
#include "icuflow/patient.hpp"
#include "icuflow/prediction.hpp"
#include "icuflow/stats.hpp"

namespace icuflow {

struct PatientResult {
  std::string stay_id;
  PredictionOutcome predicted;
  OutcomeStatus predicted_status = OutcomeStatus::survived;
  OutcomeLabel actual;
  double transparency_overall = 0.0;
};

// Throws Error when the record has no parsed prediction.
PatientResult build_patient_result(const RunRecord& record, double threshold);

struct RunMetrics {
  double accuracy_percent = 0.0;
  double los_mae_days = 0.0;
  double los_mse_days2 = 0.0;
  double los_rmse_days = 0.0;  // always sqrt(los_mse_days2)
  double mean_transparency = 0.0;
  std::size_t n_patients = 0;
  std::size_t n_excluded = 0;  // failed or unparseable records left out
};

RunMetrics compute_run_metrics(const std::vector<PatientResult>& results);

// Builds results from the successful records and computes metrics; failed or
// prediction-less records are excluded and counted.
RunMetrics metrics_from_records(const std::vector<RunRecord>& records, double threshold);

nlohmann::ordered_json run_metrics_to_json(const RunMetrics& metrics);
RunMetrics run_metrics_from_json(const nlohmann::json& doc);

struct MetricSummary {
  double mean = 0.0;
  std::optional<double> sd;  // absent for a single run
};

struct AggregatedMetrics {
  MetricSummary accuracy;
  MetricSummary mae;
  MetricSummary mse;
  MetricSummary rmse;
  MetricSummary transparency;
  std::size_t n_runs = 0;
};

AggregatedMetrics aggregate_runs(const std::vector<RunMetrics>& per_run);

// "58.6 (1.1)" style: two decimals with trailing zeros trimmed.
std::string format_mean_sd(double mean_value, std::optional<double> sd_value);

struct MetricComparison {
  std::string metric;
  bool higher_is_better = true;
  MetricSummary mas;
  MetricSummary sas;
  bool degenerate = false;  // identical paired samples, no test possible
  std::optional<TTestResult> test;
};

struct ComparisonReport {
  std::size_t n_runs = 0;
  std::size_t mas_excluded = 0;  // total excluded patients across runs
  std::size_t sas_excluded = 0;
  std::vector<MetricComparison> metrics;  // accuracy, MAE, MSE, RMSE, transparency
};

// Pairs run k of one model with run k of the other; equal run counts >= 2
// required (PairingError otherwise).
ComparisonReport compare_models(const std::vector<RunMetrics>& mas_runs,
                                const std::vector<RunMetrics>& sas_runs);

enum class ReportFormat { json, csv, markdown };

ReportFormat report_format_from_string(const std::string& text);

// Stable field order in every format; the markdown table bolds the better
// mean per row (higher accuracy/transparency, lower LOS errors).
std::string emit_report(const ComparisonReport& report, ReportFormat format);

nlohmann::ordered_json comparison_report_to_json(const ComparisonReport& report);

}  // namespace icuflow
