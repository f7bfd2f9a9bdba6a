#include "icuflow/schema.hpp"

#include <fstream>

#include "icuflow/errors.hpp"

namespace icuflow {

const std::string& TableSchema::column(const std::string& logical) const {
  auto it = columns.find(logical);
  if (it == columns.end()) {
    throw ConfigError("schema for '" + file + "' has no mapping for logical column '" + logical + "'");
  }
  return it->second;
}

SchemaConfig default_schema() {
  SchemaConfig schema;
  schema.patient = {"patient.csv",
                    {{"stay_id", "patientunitstayid"},
                     {"age", "age"},
                     {"sex", "gender"},
                     {"discharge_status", "unitdischargestatus"},
                     {"discharge_offset", "unitdischargeoffset"}}};
  schema.lab = {"lab.csv",
                {{"stay_id", "patientunitstayid"},
                 {"offset", "labresultoffset"},
                 {"name", "labname"},
                 {"value", "labresult"},
                 {"unit", "labmeasurenamesystem"}}};
  schema.vitals = {"vitalPeriodic.csv",
                   {{"stay_id", "patientunitstayid"},
                    {"offset", "observationoffset"},
                    {"heart_rate", "heartrate"},
                    {"sbp", "systemicsystolic"},
                    {"spo2", "sao2"},
                    {"temperature", "temperature"}}};
  schema.notes = {"note.csv",
                  {{"stay_id", "patientunitstayid"},
                   {"offset", "noteoffset"},
                   {"author", "notetype"},
                   {"text", "notetext"}}};
  schema.medications = {"medication.csv",
                        {{"stay_id", "patientunitstayid"},
                         {"offset", "drugstartoffset"},
                         {"drug", "drugname"},
                         {"dose", "dosage"}}};
  // Every numeric column other than the id is treated as an APS variable.
  schema.apache_aps = {"apacheApsVar.csv", {{"stay_id", "patientunitstayid"}}};
  schema.apache_result = {"apachePatientResult.csv",
                          {{"stay_id", "patientunitstayid"},
                           {"predicted_mortality", "predictedicumortality"},
                           {"predicted_los", "predictediculos"}}};
  return schema;
}

namespace {

TableSchema table_from_json(const nlohmann::json& doc, const std::string& key) {
  if (!doc.contains(key)) {
    throw ConfigError("schema document is missing table '" + key + "'");
  }
  const auto& entry = doc.at(key);
  TableSchema table;
  table.file = entry.at("file").get<std::string>();
  if (entry.contains("columns")) {
    for (const auto& item : entry.at("columns").items()) {
      table.columns[item.key()] = item.value().get<std::string>();
    }
  }
  return table;
}

nlohmann::json table_to_json(const TableSchema& table) {
  nlohmann::json entry;
  entry["file"] = table.file;
  entry["columns"] = table.columns;
  return entry;
}

}  // namespace

SchemaConfig schema_from_json(const nlohmann::json& doc) {
  SchemaConfig schema;
  schema.patient = table_from_json(doc, "patient");
  schema.lab = table_from_json(doc, "lab");
  schema.vitals = table_from_json(doc, "vitals");
  schema.notes = table_from_json(doc, "notes");
  schema.medications = table_from_json(doc, "medications");
  schema.apache_aps = table_from_json(doc, "apache_aps");
  schema.apache_result = table_from_json(doc, "apache_result");
  return schema;
}

nlohmann::json schema_to_json(const SchemaConfig& schema) {
  nlohmann::json doc;
  doc["patient"] = table_to_json(schema.patient);
  doc["lab"] = table_to_json(schema.lab);
  doc["vitals"] = table_to_json(schema.vitals);
  doc["notes"] = table_to_json(schema.notes);
  doc["medications"] = table_to_json(schema.medications);
  doc["apache_aps"] = table_to_json(schema.apache_aps);
  doc["apache_result"] = table_to_json(schema.apache_result);
  return doc;
}

SchemaConfig load_schema_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open schema file: " + path);
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("invalid schema file " + path + ": " + ex.what());
  }
  return schema_from_json(doc);
}

}  // namespace icuflow
