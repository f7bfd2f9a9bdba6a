#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "icuflow/patient.hpp"

namespace icuflow::testing {

// Unique directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("icuflow_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

// Minimal complete record: one vital sample, two labs, one note, one
// medication, a severity-shaped reference bundle, and the actual outcome.
inline PatientRecord make_patient(const std::string& stay_id, double severity, bool expired) {
  PatientRecord record;
  record.stay_id = stay_id;
  record.demographics.age = 40.0 + 40.0 * severity;
  record.demographics.sex = expired ? Sex::male : Sex::female;

  VitalSample vital;
  vital.offset_minutes = 30;
  vital.heart_rate = 70.0 + 50.0 * severity;
  vital.sbp = 130.0 - 40.0 * severity;
  vital.spo2 = 99.0 - 8.0 * severity;
  vital.temperature = 36.7 + severity;
  record.vitals.push_back(vital);

  record.labs.push_back({"lactate", 0.8 + 6.0 * severity, "mmol/L", 60});
  record.labs.push_back({"creatinine", 0.7 + 2.0 * severity, "mg/dL", 65});

  record.notes.push_back({AuthorRole::physician, 120,
                          severity > 0.5 ? "Critically ill, guarded prognosis."
                                         : "Stable overnight, weaning support."});

  record.medications.push_back({"norepinephrine", 90, "0.1 mcg/kg/min"});

  record.apache.aps_variables = {{"heartrate", 80.0 + 50.0 * severity},
                                 {"meanbp", 85.0 - 25.0 * severity}};
  record.apache.predicted_mortality = severity;
  record.apache.predicted_los_days = 2.0 + 10.0 * severity;

  record.outcome.status = expired ? OutcomeStatus::expired : OutcomeStatus::survived;
  record.outcome.actual_los_days = 2.0 + 10.0 * severity;
  return record;
}

// Balanced pool with severities spread across each stratum's band.
inline std::vector<PatientRecord> make_pool(std::size_t n_expired, std::size_t n_survived) {
  std::vector<PatientRecord> pool;
  for (std::size_t i = 0; i < n_expired; ++i) {
    const double severity = 0.60 + 0.35 * static_cast<double>(i) / std::max<std::size_t>(1, n_expired);
    pool.push_back(make_patient("2" + std::to_string(100 + i), severity, true));
  }
  for (std::size_t i = 0; i < n_survived; ++i) {
    const double severity = 0.05 + 0.35 * static_cast<double>(i) / std::max<std::size_t>(1, n_survived);
    pool.push_back(make_patient("1" + std::to_string(100 + i), severity, false));
  }
  return pool;
}

}  // namespace icuflow::testing
