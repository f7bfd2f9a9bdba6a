#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "vendor/json.hpp"

#include "icuflow/patient.hpp"
#include "icuflow/schema.hpp"

namespace icuflow {

inline constexpr std::size_t kMaxRecentVitals = 10;
inline constexpr std::size_t kMaxSelectedNotes = 3;
inline constexpr std::size_t kMaxTopMedications = 20;
inline constexpr std::size_t kMaxNoteChars = 4000;

// What happened during a load: rows skipped per file, stays dropped by the
// completeness rule, and how many vital-channel gaps were carried forward.
struct LoadReport {
  std::size_t stays_seen = 0;
  std::size_t stays_dropped_incomplete = 0;
  std::size_t records_loaded = 0;
  std::size_t gap_fills = 0;
  std::map<std::string, std::size_t> rows_skipped;

  nlohmann::ordered_json to_json() const;
  std::string summary_text() const;
};

// Joins the source tables per stay id, applies last-observation-carried-
// forward within each vital channel, sorts every event list by offset, and
// drops stays missing vitals, labs, or notes entirely.
std::vector<PatientRecord> load_cohort(const std::filesystem::path& data_dir,
                                       const SchemaConfig& schema,
                                       LoadReport* report = nullptr);

// Uniform without replacement within each outcome stratum; deterministic for
// a fixed seed.
std::vector<PatientRecord> sample_balanced(const std::vector<PatientRecord>& pool,
                                           std::size_t n_expired,
                                           std::size_t n_survived,
                                           std::uint64_t seed);

FeatureBundle extract_features(const PatientRecord& record);

}  // namespace icuflow
