#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace adaptdet::io {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict full-string number parses; throw Error{ParseError}.
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

std::string read_file(const std::string& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::string& path, std::string_view contents);

nlohmann::json read_json(const std::string& path);

/// Canonical serialization: sorted keys, two-space indent, trailing newline.
std::string dump_json(const nlohmann::json& j);

/// Headered CSV without quoting. Blank lines and '#' comments are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::string_view text);

}  // namespace adaptdet::io
