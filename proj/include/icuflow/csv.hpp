#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace icuflow {

// Minimal RFC 4180 CSV support: quoted fields, doubled quotes, embedded
// commas and newlines, CRLF or LF line endings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& content);
CsvTable read_csv_file(const std::filesystem::path& path);

std::string csv_escape(const std::string& field);
std::string render_csv(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows);
void write_csv_file(const std::filesystem::path& path,
                    const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

}  // namespace icuflow
