#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace icuflow {

enum class Sex { male, female, other };
enum class AuthorRole { physician, nurse, other };
enum class OutcomeStatus { expired, survived };

const char* to_string(Sex sex);
const char* to_string(AuthorRole role);
const char* to_string(OutcomeStatus status);
Sex sex_from_string(const std::string& text);
AuthorRole author_role_from_string(const std::string& text);
OutcomeStatus outcome_status_from_string(const std::string& text);

// One periodic vitals row. Channels are independently optional; offsets are
// minutes from unit admission and never negative.
struct VitalSample {
  std::int64_t offset_minutes = 0;
  std::optional<double> heart_rate;
  std::optional<double> sbp;
  std::optional<double> spo2;
  std::optional<double> temperature;
};

struct LabResult {
  std::string name;
  double value = 0.0;
  std::string unit;
  std::int64_t offset_minutes = 0;
};

struct ClinicalNote {
  AuthorRole author_role = AuthorRole::other;
  std::int64_t offset_minutes = 0;
  std::string text;
};

struct MedicationEntry {
  std::string drug_name;
  std::int64_t offset_minutes = 0;
  std::string dose_text;
};

// Severity-score variables plus the reference predictions, when available.
struct ApacheBundle {
  std::map<std::string, double> aps_variables;
  std::optional<double> predicted_mortality;  // probability in [0, 1]
  std::optional<double> predicted_los_days;
};

struct OutcomeLabel {
  OutcomeStatus status = OutcomeStatus::survived;
  double actual_los_days = 0.0;
};

struct Demographics {
  double age = 0.0;
  Sex sex = Sex::other;

  std::string summary() const;
};

// One ICU stay after joining all source tables. Event lists are sorted
// ascending by offset; load_cohort guarantees at least one vital, lab, and
// note per surviving record.
struct PatientRecord {
  std::string stay_id;
  Demographics demographics;
  std::vector<VitalSample> vitals;
  std::vector<LabResult> labs;
  std::vector<ClinicalNote> notes;
  std::vector<MedicationEntry> medications;
  ApacheBundle apache;
  OutcomeLabel outcome;
};

// The slice of a record the agents actually see.
struct FeatureBundle {
  std::vector<VitalSample> recent_vitals;      // last <=10 by offset, ascending
  std::vector<LabResult> distinct_labs;        // latest sample per lab name
  std::vector<ClinicalNote> selected_notes;    // <=3, physician > nurse > other
  std::vector<MedicationEntry> top_medications;  // <=20 by descending frequency
  ApacheBundle apache;
  Demographics demographics;
};

}  // namespace icuflow
