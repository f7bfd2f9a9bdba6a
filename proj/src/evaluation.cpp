#include "icuflow/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "icuflow/errors.hpp"

namespace icuflow {
namespace {

// Shortest representation that parses back to the same double, so values
// survive json -> csv -> parse round trips.
std::string exact(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

std::string trim_decimal(const std::string& fixed) {
  std::string out = fixed;
  if (out.find('.') == std::string::npos) return out;
  while (!out.empty() && out.back() == '0') out.pop_back();
  if (!out.empty() && out.back() == '.') out.pop_back();
  return out;
}

std::string two_decimal_trimmed(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return trim_decimal(buf);
}

std::vector<double> metric_values(const std::vector<RunMetrics>& runs,
                                  double RunMetrics::* field) {
  std::vector<double> values;
  values.reserve(runs.size());
  for (const auto& run : runs) values.push_back(run.*field);
  return values;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary summary;
  summary.mean = mean(values);
  if (values.size() >= 2) summary.sd = sample_sd(values);
  return summary;
}

MetricComparison compare_metric(const std::string& name, bool higher_is_better,
                                const std::vector<RunMetrics>& mas_runs,
                                const std::vector<RunMetrics>& sas_runs,
                                double RunMetrics::* field) {
  MetricComparison comparison;
  comparison.metric = name;
  comparison.higher_is_better = higher_is_better;
  const auto mas_values = metric_values(mas_runs, field);
  const auto sas_values = metric_values(sas_runs, field);
  comparison.mas = summarize(mas_values);
  comparison.sas = summarize(sas_values);
  try {
    comparison.test = paired_t_test(mas_values, sas_values);
  } catch (const DegenerateVarianceError&) {
    comparison.degenerate = true;
  }
  return comparison;
}

const char* better_side(const MetricComparison& comparison) {
  if (comparison.mas.mean == comparison.sas.mean) return "";
  const bool mas_better = comparison.higher_is_better
                              ? comparison.mas.mean > comparison.sas.mean
                              : comparison.mas.mean < comparison.sas.mean;
  return mas_better ? "mas" : "sas";
}

}  // namespace

PatientResult build_patient_result(const RunRecord& record, double threshold) {
  if (!record.prediction) {
    throw Error("run record for stay " + record.stay_id + " has no parsed prediction");
  }
  PatientResult result;
  result.stay_id = record.stay_id;
  result.predicted = *record.prediction;
  result.predicted_status = classify(result.predicted.mortality_probability, threshold);
  result.actual = record.actual;
  result.transparency_overall = record.transparency ? record.transparency->overall : 0.0;
  return result;
}

RunMetrics compute_run_metrics(const std::vector<PatientResult>& results) {
  if (results.empty()) throw Error("cannot compute metrics over zero patients");
  RunMetrics metrics;
  metrics.n_patients = results.size();
  std::size_t correct = 0;
  double abs_error = 0.0;
  double squared_error = 0.0;
  double transparency_total = 0.0;
  for (const auto& result : results) {
    if (result.predicted_status == result.actual.status) ++correct;
    const double error = result.predicted.predicted_los_days - result.actual.actual_los_days;
    abs_error += std::fabs(error);
    squared_error += error * error;
    transparency_total += result.transparency_overall;
  }
  const double n = static_cast<double>(results.size());
  metrics.accuracy_percent = 100.0 * static_cast<double>(correct) / n;
  metrics.los_mae_days = abs_error / n;
  metrics.los_mse_days2 = squared_error / n;
  metrics.los_rmse_days = std::sqrt(metrics.los_mse_days2);
  metrics.mean_transparency = transparency_total / n;
  return metrics;
}

RunMetrics metrics_from_records(const std::vector<RunRecord>& records, double threshold) {
  std::vector<PatientResult> results;
  std::size_t excluded = 0;
  for (const auto& record : records) {
    if (!record.success || !record.prediction) {
      ++excluded;
      continue;
    }
    results.push_back(build_patient_result(record, threshold));
  }
  if (results.empty()) throw Error("no successful run records to evaluate");
  RunMetrics metrics = compute_run_metrics(results);
  metrics.n_excluded = excluded;
  return metrics;
}

nlohmann::ordered_json run_metrics_to_json(const RunMetrics& metrics) {
  nlohmann::ordered_json doc;
  doc["accuracy_percent"] = metrics.accuracy_percent;
  doc["los_mae_days"] = metrics.los_mae_days;
  doc["los_mse_days2"] = metrics.los_mse_days2;
  doc["los_rmse_days"] = metrics.los_rmse_days;
  doc["mean_transparency"] = metrics.mean_transparency;
  doc["n_patients"] = metrics.n_patients;
  doc["n_excluded"] = metrics.n_excluded;
  return doc;
}

RunMetrics run_metrics_from_json(const nlohmann::json& doc) {
  RunMetrics metrics;
  metrics.accuracy_percent = doc.at("accuracy_percent").get<double>();
  metrics.los_mae_days = doc.at("los_mae_days").get<double>();
  metrics.los_mse_days2 = doc.at("los_mse_days2").get<double>();
  metrics.los_rmse_days = doc.at("los_rmse_days").get<double>();
  metrics.mean_transparency = doc.at("mean_transparency").get<double>();
  metrics.n_patients = doc.at("n_patients").get<std::size_t>();
  metrics.n_excluded = doc.at("n_excluded").get<std::size_t>();
  return metrics;
}

AggregatedMetrics aggregate_runs(const std::vector<RunMetrics>& per_run) {
  if (per_run.empty()) throw Error("cannot aggregate zero runs");
  AggregatedMetrics aggregated;
  aggregated.n_runs = per_run.size();
  aggregated.accuracy = summarize(metric_values(per_run, &RunMetrics::accuracy_percent));
  aggregated.mae = summarize(metric_values(per_run, &RunMetrics::los_mae_days));
  aggregated.mse = summarize(metric_values(per_run, &RunMetrics::los_mse_days2));
  aggregated.rmse = summarize(metric_values(per_run, &RunMetrics::los_rmse_days));
  aggregated.transparency = summarize(metric_values(per_run, &RunMetrics::mean_transparency));
  return aggregated;
}

std::string format_mean_sd(double mean_value, std::optional<double> sd_value) {
  std::string out = two_decimal_trimmed(mean_value);
  if (sd_value) out += " (" + two_decimal_trimmed(*sd_value) + ")";
  return out;
}

ComparisonReport compare_models(const std::vector<RunMetrics>& mas_runs,
                                const std::vector<RunMetrics>& sas_runs) {
  if (mas_runs.size() != sas_runs.size()) {
    throw PairingError("run counts differ: " + std::to_string(mas_runs.size()) + " vs " +
                       std::to_string(sas_runs.size()));
  }
  if (mas_runs.size() < 2) throw PairingError("model comparison needs at least two paired runs");

  ComparisonReport report;
  report.n_runs = mas_runs.size();
  for (const auto& run : mas_runs) report.mas_excluded += run.n_excluded;
  for (const auto& run : sas_runs) report.sas_excluded += run.n_excluded;
  report.metrics.push_back(compare_metric("mortality_accuracy_percent", true, mas_runs, sas_runs,
                                          &RunMetrics::accuracy_percent));
  report.metrics.push_back(
      compare_metric("los_mae_days", false, mas_runs, sas_runs, &RunMetrics::los_mae_days));
  report.metrics.push_back(
      compare_metric("los_mse_days2", false, mas_runs, sas_runs, &RunMetrics::los_mse_days2));
  report.metrics.push_back(
      compare_metric("los_rmse_days", false, mas_runs, sas_runs, &RunMetrics::los_rmse_days));
  report.metrics.push_back(compare_metric("mean_transparency", true, mas_runs, sas_runs,
                                          &RunMetrics::mean_transparency));
  return report;
}

ReportFormat report_format_from_string(const std::string& text) {
  if (text == "json") return ReportFormat::json;
  if (text == "csv") return ReportFormat::csv;
  if (text == "markdown" || text == "md") return ReportFormat::markdown;
  throw ConfigError("unknown report format: " + text + " (expected json, csv, or markdown)");
}

nlohmann::ordered_json comparison_report_to_json(const ComparisonReport& report) {
  nlohmann::ordered_json doc;
  doc["n_runs"] = report.n_runs;
  doc["mas_excluded_patients"] = report.mas_excluded;
  doc["sas_excluded_patients"] = report.sas_excluded;
  doc["metrics"] = nlohmann::ordered_json::array();
  for (const auto& metric : report.metrics) {
    nlohmann::ordered_json row;
    row["metric"] = metric.metric;
    row["higher_is_better"] = metric.higher_is_better;
    row["mas_mean"] = metric.mas.mean;
    row["mas_sd"] = metric.mas.sd ? nlohmann::ordered_json(*metric.mas.sd)
                                  : nlohmann::ordered_json(nullptr);
    row["sas_mean"] = metric.sas.mean;
    row["sas_sd"] = metric.sas.sd ? nlohmann::ordered_json(*metric.sas.sd)
                                  : nlohmann::ordered_json(nullptr);
    row["better"] = better_side(metric);
    row["degenerate"] = metric.degenerate;
    if (metric.test) {
      row["t"] = metric.test->t;
      row["df"] = metric.test->df;
      row["p_value"] = metric.test->p_value;
      row["mean_difference"] = metric.test->mean_difference;
      row["ci_low"] = metric.test->ci.low;
      row["ci_high"] = metric.test->ci.high;
      row["ci_level"] = metric.test->ci.level;
    } else {
      row["t"] = nullptr;
      row["df"] = nullptr;
      row["p_value"] = nullptr;
      row["mean_difference"] = 0.0;
      row["ci_low"] = nullptr;
      row["ci_high"] = nullptr;
      row["ci_level"] = nullptr;
    }
    doc["metrics"].push_back(std::move(row));
  }
  return doc;
}

std::string emit_report(const ComparisonReport& report, ReportFormat format) {
  if (format == ReportFormat::json) return comparison_report_to_json(report).dump(2) + "\n";

  if (format == ReportFormat::csv) {
    std::string out =
        "metric,mas_mean,mas_sd,sas_mean,sas_sd,t,df,p_value,ci_low,ci_high,degenerate\n";
    for (const auto& metric : report.metrics) {
      out += metric.metric + ",";
      out += exact(metric.mas.mean) + ",";
      out += (metric.mas.sd ? exact(*metric.mas.sd) : "") + ",";
      out += exact(metric.sas.mean) + ",";
      out += (metric.sas.sd ? exact(*metric.sas.sd) : "") + ",";
      if (metric.test) {
        out += exact(metric.test->t) + "," + exact(metric.test->df) + "," +
               exact(metric.test->p_value) + "," + exact(metric.test->ci.low) + "," +
               exact(metric.test->ci.high) + ",";
      } else {
        out += ",,,,,";
      }
      out += metric.degenerate ? "true" : "false";
      out += "\n";
    }
    return out;
  }

  std::string out;
  out += "| Metric | MAS Mean (SD) | SAS Mean (SD) | t | p | 95% CI |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& metric : report.metrics) {
    const std::string side = better_side(metric);
    std::string mas_cell = format_mean_sd(metric.mas.mean, metric.mas.sd);
    std::string sas_cell = format_mean_sd(metric.sas.mean, metric.sas.sd);
    if (side == "mas") mas_cell = "**" + mas_cell + "**";
    if (side == "sas") sas_cell = "**" + sas_cell + "**";
    out += "| " + metric.metric + " | " + mas_cell + " | " + sas_cell + " | ";
    if (metric.test) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f", metric.test->t);
      out += std::string(buf) + " | ";
      std::snprintf(buf, sizeof(buf), "%.4f", metric.test->p_value);
      out += std::string(buf) + " | ";
      std::snprintf(buf, sizeof(buf), "[%.3f, %.3f]", metric.test->ci.low, metric.test->ci.high);
      out += std::string(buf) + " |\n";
    } else {
      out += "degenerate | degenerate | degenerate |\n";
    }
  }
  out += "\nRuns per model: " + std::to_string(report.n_runs) + ". Excluded patients: MAS " +
         std::to_string(report.mas_excluded) + ", SAS " + std::to_string(report.sas_excluded) +
         ".\n";
  return out;
}

}  // namespace icuflow
