#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "memagent/errors.hpp"

namespace memagent::detail {

// Calls fn(const nlohmann::json&, line_number) for every non-blank line.
// Parse failures become FormatError naming the 1-based line.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn, std::size_t first_line = 1) {
  std::string line;
  std::size_t line_no = first_line - 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      fn(value, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad record: ") + e.what(), line_no);
    }
  }
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw SourceError("cannot open " + path.string());
  for_each_json_line(in, std::forward<Fn>(fn));
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::size_t line_no) {
  if (!obj.is_object()) throw FormatError("expected a JSON object", line_no);
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw FormatError(std::string("missing \"") + key + "\"", line_no);
  return *it;
}

}  // namespace memagent::detail
