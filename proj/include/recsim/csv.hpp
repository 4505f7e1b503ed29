#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "recsim/errors.hpp"

namespace recsim {

/// Shortest decimal string that parses back to exactly the same double.
/// Used for every number we serialize, so emitted files are byte-stable and
/// round-trip bit-exactly.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

inline bool parse_number(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

inline double require_number(std::string_view field, const std::string& origin, int row,
                             int col) {
  double v = 0.0;
  if (!parse_number(field, v))
    throw DataError(origin + ": cannot parse number at row " + std::to_string(row) +
                    ", col " + std::to_string(col) + ": '" + std::string(field) + "'");
  return v;
}

/// Comma unless the first line contains a tab.
inline char detect_delimiter(std::string_view first_line) {
  return first_line.find('\t') != std::string_view::npos ? '\t' : ',';
}

}  // namespace csv
}  // namespace recsim
