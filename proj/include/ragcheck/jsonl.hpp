#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ragcheck/error.hpp"

namespace ragcheck {

using json = nlohmann::json;

/// One parsed record of a line-delimited file with its 1-based line number.
struct NumberedRecord {
  std::size_t line = 0;
  json value;
};

/// Reads a line-delimited JSON file. Blank lines are skipped; a line that is
/// not valid JSON raises a ValidationError naming the file and line.
inline std::vector<NumberedRecord> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<NumberedRecord> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back({number, json::parse(line)});
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(number) +
                            ": malformed record: " + e.what());
    }
  }
  return records;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

/// Appends one record and flushes it to the OS before returning.
inline void append_jsonl(const std::filesystem::path& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw ValidationError("cannot append to " + path.string());
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorKind::internal, "write failed: " + path.string());
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

// Field accessors that turn json type errors into line-numbered validation errors.
inline std::string require_string(const NumberedRecord& r, const char* field) {
  if (!r.value.is_object() || !r.value.contains(field) || !r.value[field].is_string())
    throw ValidationError("line " + std::to_string(r.line) + ": missing string field '" + field +
                          "'");
  return r.value[field].get<std::string>();
}

inline double require_number(const NumberedRecord& r, const char* field) {
  if (!r.value.is_object() || !r.value.contains(field) || !r.value[field].is_number())
    throw ValidationError("line " + std::to_string(r.line) + ": missing numeric field '" + field +
                          "'");
  return r.value[field].get<double>();
}

}  // namespace ragcheck
