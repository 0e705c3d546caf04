// Copyright 2026 The argus-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "argus/error.hpp"

namespace argus::io {

using nlohmann::json;

inline std::ifstream open_in(const std::filesystem::path& path,
                             std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "' for reading");
  return in;
}

inline std::ofstream open_out(const std::filesystem::path& path,
                              std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) fail(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, std::string_view content) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

/// Parses newline-delimited JSON. Blank lines are skipped; a malformed line
/// raises a validation error naming the file and line.
inline std::vector<json> read_ndjson(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::validation,
           path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline void write_ndjson(const std::filesystem::path& path, const std::vector<json>& rows) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  for (const auto& row : rows) out << row.dump() << '\n';
}

/// Shortest round-trip decimal form; stable across runs and platforms.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Minimal CSV writer: rows of pre-formatted fields.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) { row(header); }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) buf_ << ',';
      buf_ << csv_escape(fields[i]);
    }
    buf_ << '\n';
  }

  std::string str() const { return buf_.str(); }
  void save(const std::filesystem::path& path) const { write_text(path, str()); }

 private:
  std::ostringstream buf_;
};

/// Splits one CSV line (quoted fields supported, no embedded newlines).
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

/// Reads a CSV file into header + rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorKind::validation, "missing CSV column '" + std::string(name) + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  return table;
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(ErrorKind::validation, "not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace argus::io
