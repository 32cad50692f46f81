#pragma once

// Minimal RFC-4180 style reader/writer used for every tabular artifact.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace geomatch::csv {

std::vector<std::string> split_line(std::string_view line);
std::string escape(std::string_view field);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Table read(const std::filesystem::path& path);

double parse_double(std::string_view token, std::string_view column, std::size_t row);
long long parse_integer(std::string_view token, std::string_view column, std::size_t row);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  Writer& row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

}  // namespace geomatch::csv
