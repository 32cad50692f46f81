#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geomatch/schema.hpp"

namespace geomatch {

/// A candidate settlement location with the regional attributes used as
/// model-time predictors and by the robustness rules.
struct Location {
  int id = 0;  // dense, 1..K
  std::string name;
  double population = 1.0;
  double unemployment_rate = 0.0;
  double annual_rent = 0.0;
  double growth_rate = 0.0;

  bool operator==(const Location&) const = default;
};

struct ImmigrantRecord {
  std::int64_t id = 0;
  CovariateVector covariates;
  int landing = 0;
  double outcome = 0.0;
  int case_size = 1;
  std::optional<double> spouse_outcome;

  bool operator==(const ImmigrantRecord&) const = default;
};

struct Dataset {
  Schema schema;
  std::vector<ImmigrantRecord> records;
  std::vector<Location> locations;

  /// Throws SchemaError/ConfigError when any documented invariant fails.
  void validate() const;

  std::size_t location_count() const noexcept { return locations.size(); }
  const Location& location(int id) const;
  std::vector<double> outcomes() const;
};

struct LoadResult {
  Dataset dataset;
  std::size_t unknown_levels = 0;  // categorical tokens mapped to "missing"
};

/// Reads a dataset CSV. Columns are the schema features plus `landing` and
/// `outcome`; `id`, `case_size` and `spouse_outcome` are optional. When
/// `locations` is empty, locations 1..max(landing) are synthesized with
/// default attributes.
LoadResult load_dataset(const std::filesystem::path& path, const Schema& schema,
                        std::span<const Location> locations = {});
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);

std::vector<Location> load_locations(const std::filesystem::path& path);
void write_locations(const std::filesystem::path& path, std::span<const Location> locations);

Schema load_schema(const std::filesystem::path& path);
void write_schema(const std::filesystem::path& path, const Schema& schema);

/// Empirical quantile rank of each outcome: (average 1-based rank - 0.5) / n.
std::vector<double> income_quantile_ranks(std::span<const double> outcomes);
std::vector<double> income_quantile_ranks(const Dataset& dataset);

/// Human-readable value of feature `feature` for display and grouping.
std::string feature_label(const Schema& schema, const CovariateVector& x, std::size_t feature);

}  // namespace geomatch
