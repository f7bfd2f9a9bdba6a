#include "icuflow/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <unordered_map>

#include "icuflow/csv.hpp"
#include "icuflow/errors.hpp"
#include "icuflow/rng.hpp"

namespace icuflow {
namespace {

std::string trimmed(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

std::optional<double> parse_double(const std::string& cell) {
  const std::string text = trimmed(cell);
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_int(const std::string& cell) {
  const std::string text = trimmed(cell);
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const long long value = std::strtoll(text.c_str(), &end, 10);
  if (end != text.c_str() + text.size()) return std::nullopt;
  return value;
}

// eICU masks ages above 89 as "> 89".
std::optional<double> parse_age(const std::string& cell) {
  const std::string text = trimmed(cell);
  if (text.empty()) return std::nullopt;
  if (text.find('>') != std::string::npos) return 90.0;
  return parse_double(text);
}

struct TableView {
  CsvTable table;
  std::map<std::string, std::size_t> index;  // logical name -> column index
  std::string file;
};

TableView open_table(const std::filesystem::path& data_dir, const TableSchema& schema) {
  const auto path = data_dir / schema.file;
  if (!std::filesystem::exists(path)) {
    throw MissingFileError("required data file not found: " + path.string());
  }
  TableView view;
  view.file = schema.file;
  view.table = read_csv_file(path);
  for (const auto& [logical, header] : schema.columns) {
    auto column = view.table.column(header);
    if (!column) {
      throw MissingFileError("file " + path.string() + " lacks required column '" + header + "'");
    }
    view.index[logical] = *column;
  }
  return view;
}

const std::string& cell(const std::vector<std::string>& row, std::size_t index) {
  static const std::string empty;
  return index < row.size() ? row[index] : empty;
}

// Carries the last seen value forward within one channel; leading gaps stay
// absent. Returns the number of fills performed.
std::size_t carry_forward(std::vector<VitalSample>& vitals) {
  std::size_t fills = 0;
  std::optional<double> hr, sbp, spo2, temp;
  for (auto& sample : vitals) {
    auto fill = [&fills](std::optional<double>& slot, std::optional<double>& last) {
      if (slot.has_value()) {
        last = slot;
      } else if (last.has_value()) {
        slot = last;
        ++fills;
      }
    };
    fill(sample.heart_rate, hr);
    fill(sample.sbp, sbp);
    fill(sample.spo2, spo2);
    fill(sample.temperature, temp);
  }
  return fills;
}

}  // namespace

nlohmann::ordered_json LoadReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["stays_seen"] = stays_seen;
  doc["stays_dropped_incomplete"] = stays_dropped_incomplete;
  doc["records_loaded"] = records_loaded;
  doc["gap_fills"] = gap_fills;
  doc["rows_skipped"] = rows_skipped;
  return doc;
}

std::string LoadReport::summary_text() const {
  std::ostringstream out;
  out << "loaded " << records_loaded << " of " << stays_seen << " stays ("
      << stays_dropped_incomplete << " dropped incomplete, " << gap_fills << " gaps filled)";
  std::size_t skipped = 0;
  for (const auto& [file, count] : rows_skipped) skipped += count;
  if (skipped > 0) out << "; " << skipped << " malformed rows skipped";
  return out.str();
}

std::vector<PatientRecord> load_cohort(const std::filesystem::path& data_dir,
                                       const SchemaConfig& schema,
                                       LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  rep = LoadReport{};

  auto skip = [&rep](const std::string& file) { ++rep.rows_skipped[file]; };

  const TableView patients = open_table(data_dir, schema.patient);
  const TableView labs = open_table(data_dir, schema.lab);
  const TableView vitals = open_table(data_dir, schema.vitals);
  const TableView notes = open_table(data_dir, schema.notes);
  const TableView medications = open_table(data_dir, schema.medications);
  const TableView apache_aps = open_table(data_dir, schema.apache_aps);
  const TableView apache_result = open_table(data_dir, schema.apache_result);

  std::vector<PatientRecord> records;
  std::unordered_map<std::string, std::size_t> by_stay;

  for (const auto& row : patients.table.rows) {
    const std::string stay_id = trimmed(cell(row, patients.index.at("stay_id")));
    const auto age = parse_age(cell(row, patients.index.at("age")));
    const auto discharge_offset = parse_double(cell(row, patients.index.at("discharge_offset")));
    if (stay_id.empty() || !age || !discharge_offset) {
      skip(patients.file);
      continue;
    }
    if (by_stay.count(stay_id)) {
      skip(patients.file);
      continue;
    }
    PatientRecord record;
    record.stay_id = stay_id;
    record.demographics.age = *age;
    record.demographics.sex = sex_from_string(cell(row, patients.index.at("sex")));
    record.outcome.status =
        outcome_status_from_string(cell(row, patients.index.at("discharge_status")));
    record.outcome.actual_los_days = std::max(0.0, *discharge_offset) / 1440.0;
    by_stay[stay_id] = records.size();
    records.push_back(std::move(record));
  }
  rep.stays_seen = records.size();

  auto find_record = [&](const std::string& stay_id) -> PatientRecord* {
    auto it = by_stay.find(stay_id);
    return it == by_stay.end() ? nullptr : &records[it->second];
  };

  for (const auto& row : vitals.table.rows) {
    PatientRecord* record = find_record(trimmed(cell(row, vitals.index.at("stay_id"))));
    const auto offset = parse_int(cell(row, vitals.index.at("offset")));
    if (!record || !offset || *offset < 0) {
      skip(vitals.file);
      continue;
    }
    VitalSample sample;
    sample.offset_minutes = *offset;
    sample.heart_rate = parse_double(cell(row, vitals.index.at("heart_rate")));
    sample.sbp = parse_double(cell(row, vitals.index.at("sbp")));
    sample.spo2 = parse_double(cell(row, vitals.index.at("spo2")));
    sample.temperature = parse_double(cell(row, vitals.index.at("temperature")));
    if (sample.spo2 && (*sample.spo2 < 0.0 || *sample.spo2 > 100.0)) {
      skip(vitals.file);
      continue;
    }
    record->vitals.push_back(sample);
  }

  for (const auto& row : labs.table.rows) {
    PatientRecord* record = find_record(trimmed(cell(row, labs.index.at("stay_id"))));
    const auto offset = parse_int(cell(row, labs.index.at("offset")));
    const std::string name = trimmed(cell(row, labs.index.at("name")));
    const auto value = parse_double(cell(row, labs.index.at("value")));
    if (!record || !offset || name.empty() || !value) {
      skip(labs.file);
      continue;
    }
    record->labs.push_back({name, *value, trimmed(cell(row, labs.index.at("unit"))), *offset});
  }

  for (const auto& row : notes.table.rows) {
    PatientRecord* record = find_record(trimmed(cell(row, notes.index.at("stay_id"))));
    const auto offset = parse_int(cell(row, notes.index.at("offset")));
    std::string text = trimmed(cell(row, notes.index.at("text")));
    if (!record || !offset || text.empty()) {
      skip(notes.file);
      continue;
    }
    if (text.size() > kMaxNoteChars) {
      text = text.substr(0, kMaxNoteChars) + "[truncated]";
    }
    ClinicalNote note;
    note.author_role = author_role_from_string(cell(row, notes.index.at("author")));
    note.offset_minutes = *offset;
    note.text = std::move(text);
    record->notes.push_back(std::move(note));
  }

  for (const auto& row : medications.table.rows) {
    PatientRecord* record = find_record(trimmed(cell(row, medications.index.at("stay_id"))));
    const auto offset = parse_int(cell(row, medications.index.at("offset")));
    const std::string drug = trimmed(cell(row, medications.index.at("drug")));
    if (!record || !offset || drug.empty()) {
      skip(medications.file);
      continue;
    }
    record->medications.push_back({drug, *offset, trimmed(cell(row, medications.index.at("dose")))});
  }

  const std::size_t aps_id_column = apache_aps.index.at("stay_id");
  for (const auto& row : apache_aps.table.rows) {
    PatientRecord* record = find_record(trimmed(cell(row, aps_id_column)));
    if (!record) {
      skip(apache_aps.file);
      continue;
    }
    for (std::size_t i = 0; i < apache_aps.table.header.size(); ++i) {
      if (i == aps_id_column) continue;
      if (const auto value = parse_double(cell(row, i))) {
        record->apache.aps_variables[apache_aps.table.header[i]] = *value;
      }
    }
  }

  for (const auto& row : apache_result.table.rows) {
    PatientRecord* record = find_record(trimmed(cell(row, apache_result.index.at("stay_id"))));
    if (!record) {
      skip(apache_result.file);
      continue;
    }
    const auto mortality = parse_double(cell(row, apache_result.index.at("predicted_mortality")));
    if (mortality && *mortality >= 0.0 && *mortality <= 1.0) {
      record->apache.predicted_mortality = mortality;
    }
    const auto los = parse_double(cell(row, apache_result.index.at("predicted_los")));
    if (los && *los >= 0.0) {
      record->apache.predicted_los_days = los;
    }
  }

  std::vector<PatientRecord> complete;
  complete.reserve(records.size());
  for (auto& record : records) {
    if (record.vitals.empty() || record.labs.empty() || record.notes.empty()) {
      ++rep.stays_dropped_incomplete;
      continue;
    }
    auto by_offset = [](const auto& a, const auto& b) { return a.offset_minutes < b.offset_minutes; };
    std::stable_sort(record.vitals.begin(), record.vitals.end(), by_offset);
    std::stable_sort(record.labs.begin(), record.labs.end(), by_offset);
    std::stable_sort(record.notes.begin(), record.notes.end(), by_offset);
    std::stable_sort(record.medications.begin(), record.medications.end(), by_offset);
    rep.gap_fills += carry_forward(record.vitals);
    complete.push_back(std::move(record));
  }

  rep.records_loaded = complete.size();
  if (complete.empty()) {
    throw EmptyCohortError("no complete stays survived the load from " + data_dir.string());
  }
  return complete;
}

std::vector<PatientRecord> sample_balanced(const std::vector<PatientRecord>& pool,
                                           std::size_t n_expired,
                                           std::size_t n_survived,
                                           std::uint64_t seed) {
  std::vector<std::size_t> expired;
  std::vector<std::size_t> survived;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    (pool[i].outcome.status == OutcomeStatus::expired ? expired : survived).push_back(i);
  }
  if (expired.size() < n_expired) {
    throw StratumError("expired stratum has " + std::to_string(expired.size()) + " records, " +
                       std::to_string(n_expired) + " requested (short by " +
                       std::to_string(n_expired - expired.size()) + ")");
  }
  if (survived.size() < n_survived) {
    throw StratumError("survived stratum has " + std::to_string(survived.size()) + " records, " +
                       std::to_string(n_survived) + " requested (short by " +
                       std::to_string(n_survived - survived.size()) + ")");
  }

  Rng rng(mix64(seed, 0x5a6d70 /* "sample" salt */));
  auto draw = [&rng](std::vector<std::size_t>& stratum, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.bounded(stratum.size() - i));
      std::swap(stratum[i], stratum[j]);
    }
    stratum.resize(count);
  };
  draw(expired, n_expired);
  draw(survived, n_survived);

  std::vector<PatientRecord> sampled;
  sampled.reserve(n_expired + n_survived);
  for (std::size_t i : expired) sampled.push_back(pool[i]);
  for (std::size_t i : survived) sampled.push_back(pool[i]);
  return sampled;
}

FeatureBundle extract_features(const PatientRecord& record) {
  FeatureBundle bundle;
  bundle.apache = record.apache;
  bundle.demographics = record.demographics;

  const std::size_t n_vitals = record.vitals.size();
  const std::size_t first = n_vitals > kMaxRecentVitals ? n_vitals - kMaxRecentVitals : 0;
  bundle.recent_vitals.assign(record.vitals.begin() + static_cast<std::ptrdiff_t>(first),
                              record.vitals.end());

  // Latest sample per lab name; labs are sorted ascending so later wins.
  std::map<std::string, LabResult> latest;
  for (const auto& lab : record.labs) {
    auto [it, inserted] = latest.insert_or_assign(lab.name, lab);
    (void)it;
    (void)inserted;
  }
  bundle.distinct_labs.reserve(latest.size());
  for (const auto& [name, lab] : latest) bundle.distinct_labs.push_back(lab);

  std::vector<ClinicalNote> notes = record.notes;
  std::stable_sort(notes.begin(), notes.end(), [](const ClinicalNote& a, const ClinicalNote& b) {
    if (a.author_role != b.author_role) {
      return static_cast<int>(a.author_role) < static_cast<int>(b.author_role);
    }
    if (a.offset_minutes != b.offset_minutes) return a.offset_minutes > b.offset_minutes;
    return a.text < b.text;
  });
  if (notes.size() > kMaxSelectedNotes) notes.resize(kMaxSelectedNotes);
  bundle.selected_notes = std::move(notes);

  std::map<std::string, std::size_t> counts;
  std::map<std::string, MedicationEntry> latest_dose;
  for (const auto& med : record.medications) {
    ++counts[med.drug_name];
    auto it = latest_dose.find(med.drug_name);
    if (it == latest_dose.end() || med.offset_minutes >= it->second.offset_minutes) {
      latest_dose[med.drug_name] = med;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > kMaxTopMedications) ranked.resize(kMaxTopMedications);
  bundle.top_medications.reserve(ranked.size());
  for (const auto& [name, count] : ranked) bundle.top_medications.push_back(latest_dose[name]);

  return bundle;
}

}  // namespace icuflow
