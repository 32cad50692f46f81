#include "geomatch/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "csv.hpp"
#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"

namespace geomatch {

void Dataset::validate() const {
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto& loc = locations[i];
    if (loc.id != static_cast<int>(i) + 1) throw ConfigError("location ids must be dense 1..K in order");
    if (!(loc.population > 0)) throw ConfigError("location " + std::to_string(loc.id) + ": population must be > 0");
    if (loc.unemployment_rate < 0 || loc.unemployment_rate > 1) {
      throw ConfigError("location " + std::to_string(loc.id) + ": unemployment_rate outside [0,1]");
    }
    if (loc.annual_rent < 0) throw ConfigError("location " + std::to_string(loc.id) + ": annual_rent < 0");
  }
  std::unordered_set<std::int64_t> ids;
  for (const auto& r : records) {
    geomatch::validate(schema, r.covariates);
    if (!ids.insert(r.id).second) throw SchemaError("duplicate record id " + std::to_string(r.id));
    if (r.landing < 1 || r.landing > static_cast<int>(locations.size())) {
      throw SchemaError("record " + std::to_string(r.id) + ": landing " + std::to_string(r.landing) +
                        " is not a known location");
    }
    if (!(r.outcome >= 0) || !std::isfinite(r.outcome)) {
      throw SchemaError("record " + std::to_string(r.id) + ": outcome must be finite and >= 0");
    }
    if (r.case_size < 1) throw SchemaError("record " + std::to_string(r.id) + ": case_size < 1");
    if (r.spouse_outcome && r.case_size < 2) {
      throw SchemaError("record " + std::to_string(r.id) + ": spouse_outcome requires case_size >= 2");
    }
  }
}

const Location& Dataset::location(int id) const {
  if (id < 1 || id > static_cast<int>(locations.size())) {
    throw SchemaError("unknown location id " + std::to_string(id));
  }
  return locations[static_cast<std::size_t>(id - 1)];
}

std::vector<double> Dataset::outcomes() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.outcome);
  return out;
}

LoadResult load_dataset(const std::filesystem::path& path, const Schema& schema,
                        std::span<const Location> locations) {
  const auto table = csv::read(path);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < table.header.size(); ++i) column.emplace(table.header[i], i);

  auto require = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw SchemaError("missing required column: " + name);
    return it->second;
  };
  auto optional = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = column.find(name);
    if (it == column.end()) return std::nullopt;
    return it->second;
  };

  std::vector<std::size_t> feature_columns;
  for (const auto& f : schema.features()) feature_columns.push_back(require(f.name));
  const auto landing_col = require("landing");
  const auto outcome_col = require("outcome");
  const auto id_col = optional("id");
  const auto case_col = optional("case_size");
  const auto spouse_col = optional("spouse_outcome");

  LoadResult result;
  auto& ds = result.dataset;
  ds.schema = schema;
  ds.records.reserve(table.rows.size());
  int max_landing = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = r + 2;  // 1-based, counting the header
    if (row.size() != table.header.size()) {
      throw ParseError("row " + std::to_string(line) + ": expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(row.size()));
    }
    ImmigrantRecord rec;
    rec.id = id_col ? csv::parse_integer(row[*id_col], "id", line) : static_cast<std::int64_t>(r + 1);
    rec.covariates.values.resize(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& spec = schema.feature(f);
      const auto& token = row[feature_columns[f]];
      if (spec.kind == FeatureKind::numeric) {
        rec.covariates.values[f] = csv::parse_double(token, spec.name, line);
      } else if (token.empty()) {
        rec.covariates.values[f] = schema.missing_code(f);
      } else if (auto code = schema.level_code(f, token)) {
        rec.covariates.values[f] = *code;
      } else {
        rec.covariates.values[f] = schema.missing_code(f);
        ++result.unknown_levels;
      }
    }
    rec.landing = static_cast<int>(csv::parse_integer(row[landing_col], "landing", line));
    rec.outcome = csv::parse_double(row[outcome_col], "outcome", line);
    if (case_col && !row[*case_col].empty()) {
      rec.case_size = static_cast<int>(csv::parse_integer(row[*case_col], "case_size", line));
    }
    if (spouse_col && !row[*spouse_col].empty()) {
      rec.spouse_outcome = csv::parse_double(row[*spouse_col], "spouse_outcome", line);
    }
    max_landing = std::max(max_landing, rec.landing);
    ds.records.push_back(std::move(rec));
  }

  if (locations.empty()) {
    for (int id = 1; id <= max_landing; ++id) ds.locations.push_back(Location{id, "loc" + std::to_string(id)});
  } else {
    ds.locations.assign(locations.begin(), locations.end());
  }
  ds.validate();
  return result;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  csv::Writer out(path);
  std::vector<std::string> header{"id"};
  for (const auto& f : dataset.schema.features()) header.push_back(f.name);
  header.insert(header.end(), {"landing", "outcome", "case_size", "spouse_outcome"});
  out.row(header);
  for (const auto& r : dataset.records) {
    std::vector<std::string> fields{std::to_string(r.id)};
    for (std::size_t f = 0; f < dataset.schema.size(); ++f) fields.push_back(feature_label(dataset.schema, r.covariates, f));
    fields.push_back(std::to_string(r.landing));
    fields.push_back(format_double(r.outcome));
    fields.push_back(std::to_string(r.case_size));
    fields.push_back(r.spouse_outcome ? format_double(*r.spouse_outcome) : std::string{});
    out.row(fields);
  }
}

std::vector<Location> load_locations(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < table.header.size(); ++i) column.emplace(table.header[i], i);
  auto col = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end()) throw SchemaError("locations file: missing required column: " + name);
    return it->second;
  };
  const auto id = col("id"), name = col("name"), pop = col("population"), unemp = col("unemployment_rate"),
             rent = col("annual_rent");
  const auto growth = column.count("growth_rate") ? std::optional(column.at("growth_rate")) : std::nullopt;
  std::vector<Location> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = r + 2;
    Location loc;
    loc.id = static_cast<int>(csv::parse_integer(row.at(id), "id", line));
    loc.name = row.at(name);
    loc.population = csv::parse_double(row.at(pop), "population", line);
    loc.unemployment_rate = csv::parse_double(row.at(unemp), "unemployment_rate", line);
    loc.annual_rent = csv::parse_double(row.at(rent), "annual_rent", line);
    if (growth) loc.growth_rate = csv::parse_double(row.at(*growth), "growth_rate", line);
    out.push_back(std::move(loc));
  }
  return out;
}

void write_locations(const std::filesystem::path& path, std::span<const Location> locations) {
  csv::Writer out(path);
  out.row({"id", "name", "population", "unemployment_rate", "annual_rent", "growth_rate"});
  for (const auto& l : locations) {
    out.row({std::to_string(l.id), l.name, format_double(l.population), format_double(l.unemployment_rate),
             format_double(l.annual_rent), format_double(l.growth_rate)});
  }
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return Schema::from_json(buffer.str());
}

void write_schema(const std::filesystem::path& path, const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << schema.to_json() << '\n';
}

std::vector<double> income_quantile_ranks(std::span<const double> outcomes) {
  const std::size_t n = outcomes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outcomes[a] < outcomes[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && outcomes[order[j]] == outcomes[order[i]]) ++j;
    // Positions i..j-1 (0-based) share the average 1-based rank.
    const double average_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = (average_rank - 0.5) / static_cast<double>(n);
    i = j;
  }
  return ranks;
}

std::vector<double> income_quantile_ranks(const Dataset& dataset) {
  const auto y = dataset.outcomes();
  return income_quantile_ranks(std::span<const double>(y));
}

std::string feature_label(const Schema& schema, const CovariateVector& x, std::size_t feature) {
  const double v = x.values.at(feature);
  if (schema.feature(feature).kind == FeatureKind::categorical) {
    return schema.level_name(feature, static_cast<int>(v));
  }
  return format_double(v);
}

}  // namespace geomatch
