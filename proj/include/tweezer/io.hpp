#pragma once

// RFC-4180 CSV output. Each file opens with one comment line naming the plot
// it feeds, then a header row. Numbers use the shortest round-trip form so
// identical runs produce identical bytes.

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tweezer/error.hpp"

namespace tweezer::io {

using Cell = std::variant<double, long long, std::string>;

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::string_view figure, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary), columns_(columns.size()) {
    if (!out_) throw ConfigError("cannot write '" + path + "'");
    out_ << "# figure: " << figure << "\r\n";
    row_strings(columns);
  }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_) throw ConfigError("CSV row width does not match the header");
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (const auto& c : cells) {
      if (const auto* d = std::get_if<double>(&c)) s.push_back(format_number(*d));
      else if (const auto* i = std::get_if<long long>(&c)) s.push_back(std::to_string(*i));
      else s.push_back(std::get<std::string>(c));
    }
    row_strings(s);
  }

 private:
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << quote(cells[k]);
    out_ << "\r\n";
  }

  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace tweezer::io
