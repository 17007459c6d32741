#pragma once

// Minimal comma-separated reading/writing. Fields never contain commas or
// quotes in the formats this project produces, so no quoting is handled.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tensorad/error.hpp"

namespace tensorad::csv {

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline double to_double(std::string_view s, std::string_view field) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("field '" + std::string(field) + "': cannot parse '" + std::string(s) +
                    "' as a number");
  }
  return v;
}

inline std::int64_t to_int(std::string_view s, std::string_view field) {
  s = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("field '" + std::string(field) + "': cannot parse '" + std::string(s) +
                    "' as an integer");
  }
  return v;
}

/// Header-aware row reader. Columns are looked up by name once.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {
    std::string line;
    if (!std::getline(in_, line)) throw DataError("csv: missing header row");
    for (auto f : split(trim(line))) header_.emplace_back(trim(f));
  }

  std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header_.size(); ++c) {
      if (header_[c] == name) return c;
    }
    throw DataError("csv: missing required column '" + std::string(name) + "'");
  }

  bool has_column(std::string_view name) const {
    for (const auto& h : header_) {
      if (h == name) return true;
    }
    return false;
  }

  const std::vector<std::string>& header() const { return header_; }

  /// Reads the next non-empty row; returns false at end of input.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      std::string_view v = trim(line_);
      if (v.empty()) continue;
      fields = split(v);
      if (fields.size() != header_.size()) {
        throw DataError("csv: row " + std::to_string(line_no_) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header_.size()));
      }
      return true;
    }
    return false;
  }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::string line_;
  std::size_t line_no_ = 1;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  return out;
}

}  // namespace tensorad::csv
