#pragma once

// Round-trippable decimal formatting and small parsing helpers shared by the
// model export formats and the CSV writer.

#include <charconv>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace infoplan {

// Shortest decimal that parses back to exactly the same double.
inline std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

inline double parse_double(std::string_view text) {
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw std::invalid_argument("not a decimal number: '" + std::string(text) + "'");
  }
  return value;
}

inline long long parse_int(std::string_view text) {
  long long value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

inline std::uint64_t parse_uint(std::string_view text) {
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || end != text.data() + text.size()) {
    throw std::invalid_argument("not an unsigned integer: '" + std::string(text) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename Range>
std::string join_doubles(const Range& values) {
  std::string out;
  bool first = true;
  for (double v : values) {
    if (!first) out += ' ';
    out += format_double(v);
    first = false;
  }
  return out;
}

// Line reader for the "key value..." text formats. Tracks line numbers for
// error messages and skips blank lines.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::vector<std::string_view> next() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      auto fields = split_whitespace(line_);
      if (!fields.empty()) return fields;
    }
    throw std::runtime_error("unexpected end of input after line " + std::to_string(line_no_));
  }

  // Reads a line whose first token is `key` and returns the remaining fields.
  std::vector<std::string_view> expect(std::string_view key) {
    auto fields = next();
    if (fields.front() != key) {
      throw std::runtime_error("line " + std::to_string(line_no_) + ": expected '" +
                               std::string(key) + "', found '" + std::string(fields.front()) + "'");
    }
    fields.erase(fields.begin());
    return fields;
  }

  std::vector<double> expect_doubles(std::string_view key, std::size_t count) {
    auto fields = expect(key);
    if (fields.size() != count) {
      throw std::runtime_error("line " + std::to_string(line_no_) + ": expected " +
                               std::to_string(count) + " values for '" + std::string(key) + "'");
    }
    std::vector<double> out;
    out.reserve(count);
    for (auto f : fields) out.push_back(parse_double(f));
    return out;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::string line_;
  std::size_t line_no_ = 0;
};

}  // namespace infoplan
