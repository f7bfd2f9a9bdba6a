#pragma once

#include <map>
#include <string>

#include "vendor/json.hpp"

namespace icuflow {

// Column-name mapping for one source table. `columns` maps the loader's
// logical field names to the header names found in the file, so both real
// eICU exports and synthetic fixtures load through the same path.
struct TableSchema {
  std::string file;
  std::map<std::string, std::string> columns;

  const std::string& column(const std::string& logical) const;
};

struct SchemaConfig {
  TableSchema patient;
  TableSchema lab;
  TableSchema vitals;
  TableSchema notes;
  TableSchema medications;
  TableSchema apache_aps;
  TableSchema apache_result;
};

// eICU v2.0 file and column names.
SchemaConfig default_schema();

SchemaConfig schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const SchemaConfig& schema);
SchemaConfig load_schema_file(const std::string& path);

}  // namespace icuflow
