#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cgat/errors.hpp"

namespace cgat::detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// Calls fn(fields, line_number) for every non-empty, non-comment line.
inline void for_each_tsv_line(
    const std::filesystem::path& path, std::size_t expected_fields,
    const std::function<void(const std::vector<std::string_view>&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_tabs(line);
    if (fields.size() != expected_fields) {
      throw ParseError(path.string(), lineno,
                       "expected " + std::to_string(expected_fields) + " tab-separated fields, got " +
                           std::to_string(fields.size()));
    }
    fn(fields, lineno);
  }
}

inline double parse_double(std::string_view text, const std::filesystem::path& path,
                           std::size_t lineno) {
  try {
    std::size_t used = 0;
    const std::string s(text);
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError(path.string(), lineno, "not a number: '" + std::string(text) + "'");
  }
}

inline std::uint32_t parse_index(std::string_view text, const std::filesystem::path& path,
                                 std::size_t lineno) {
  std::uint32_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(path.string(), lineno, "not an index: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace cgat::detail
