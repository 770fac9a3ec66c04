#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "psyfit/error.hpp"

namespace psyfit::tsv {

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Fields must not contain the delimiter or line breaks.
inline void check_field(std::string_view s, std::string_view what) {
  if (s.find_first_of("\t\r\n") != std::string_view::npos) {
    throw DataError("field '" + std::string(what) + "' contains a tab or newline: " + std::string(s));
  }
}

/// Header-indexed reader over tab-delimited text. Data rows are numbered from 1; the header is row 0.
class Reader {
public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {
    std::string header;
    if (!next_line(header)) throw DataError(source_ + ": empty file (no header)");
    header_line_ = header;
    const auto names = split(header_line_);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (!columns_.emplace(std::string(names[i]), i).second) {
        throw DataError(source_ + ": duplicate column '" + std::string(names[i]) + "'");
      }
    }
    width_ = names.size();
  }

  [[nodiscard]] const std::string& source() const noexcept { return source_; }

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const {
    const auto it = columns_.find(std::string(name));
    if (it == columns_.end()) return std::nullopt;
    return it->second;
  }

  [[nodiscard]] std::size_t require(std::string_view name) const {
    if (auto c = column(name)) return *c;
    throw DataError(source_ + ": missing mandatory column '" + std::string(name) + "'");
  }

  /// Reads the next data row. Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string_view>& fields) {
    while (next_line(line_)) {
      ++row_;
      if (line_.empty()) continue;
      fields = split(line_);
      return true;
    }
    return false;
  }

  [[nodiscard]] std::size_t row() const noexcept { return row_; }
  [[nodiscard]] std::size_t width() const noexcept { return width_; }

  [[nodiscard]] std::string where() const { return source_ + ": row " + std::to_string(row_); }

private:
  bool next_line(std::string& out) {
    if (!std::getline(in_, out)) return false;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  }

  std::istream& in_;
  std::string source_;
  std::string header_line_;
  std::string line_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::size_t width_ = 0;
  std::size_t row_ = 0;
};

} // namespace psyfit::tsv
