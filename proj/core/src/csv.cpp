#include "csv.hpp"

#include <charconv>
#include <cmath>

#include "geomatch/error.hpp"

namespace geomatch::csv {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open " + path.string());
  Table table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    table.rows.push_back(split_line(line));
  }
  return table;
}

double parse_double(std::string_view token, std::string_view column, std::size_t row) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [end, ec] = std::from_chars(first, last, value);
  if (token.empty() || ec != std::errc() || end != last || !std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row) + ", column " + std::string(column) + ": not a number: '" +
                     std::string(token) + "'");
  }
  return value;
}

long long parse_integer(std::string_view token, std::string_view column, std::size_t row) {
  long long value = 0;
  auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || end != token.data() + token.size()) {
    throw ParseError("row " + std::to_string(row) + ", column " + std::string(column) + ": not an integer: '" +
                     std::string(token) + "'");
  }
  return value;
}

Writer::Writer(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw ArtifactError("cannot write " + path.string());
}

Writer& Writer::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << escape(fields[i]);
  }
  out_ << '\n';
  return *this;
}

}  // namespace geomatch::csv
