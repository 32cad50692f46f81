#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "geomatch/dataset.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/preferences.hpp"
#include "geomatch/random.hpp"

namespace geomatch {

enum class OutcomeMode { income, rent_adjusted, joint_per_adult };

std::string_view to_string(OutcomeMode mode);
OutcomeMode parse_outcome_mode(std::string_view text);

struct PredictionOptions {
  OutcomeMode mode = OutcomeMode::income;
  /// Joint mode: predicted partner income as a fraction of the principal's.
  double spouse_ratio = 0.6;
  unsigned threads = 1;
};

/// n clients x K modeled locations, row-major.
struct PredictionMatrix {
  std::vector<std::int64_t> individual_ids;
  std::vector<int> location_ids;
  std::vector<double> values;
  OutcomeMode mode = OutcomeMode::income;
  double spouse_ratio = 0.6;
  std::string model_hash;

  std::size_t rows() const noexcept { return individual_ids.size(); }
  std::size_t cols() const noexcept { return location_ids.size(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  std::optional<std::size_t> column_of(int location_id) const;
};

/// Predicted values of one profile at every modeled location, in the order
/// of `models.modeled_locations()`. Location attributes come from `locations`.
std::vector<double> prediction_row(const ModelSet& models, std::span<const Location> locations,
                                   const CovariateVector& x, int case_size, const PredictionOptions& options);

PredictionMatrix build_prediction_matrix(const ModelSet& models, const Dataset& clients,
                                         const PredictionOptions& options = {});

struct Recommendation {
  std::int64_t id = 0;
  std::vector<int> locations;  // best first, length z' = min(z, t)
  std::vector<double> values;
  std::size_t t = 0;  // acceptable locations present in the row
  int z = 0;
};

/// Top z' locations of `row` restricted to `acceptable`, sorted by value with
/// exact ties permuted at random. Acceptable ids absent from `location_ids`
/// are ignored.
Recommendation recommend(std::span<const int> location_ids, std::span<const double> row,
                         const AcceptableSet& acceptable, int z, Rng& rng);

/// Competition rank of `actual` within the row: 1 + number of strictly larger values.
int landing_rank(std::span<const int> location_ids, std::span<const double> row, int actual);

/// Per-client landing rank over the full matrix; skips clients whose landing
/// location is unmodeled (returned as 0).
std::vector<int> landing_ranks(const PredictionMatrix& matrix, const Dataset& clients);
void write_rank_report(const std::filesystem::path& path, const PredictionMatrix& matrix, std::span<const int> ranks,
                       const Dataset& clients);

/// CSV with `individual_id` plus one column per location id; the mode and
/// model hash go into `<path>.json`.
void write_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& matrix);
PredictionMatrix load_prediction_matrix(const std::filesystem::path& path);

std::string recommendation_json(const Recommendation& rec);
void write_recommendations(const std::filesystem::path& path, std::span<const Recommendation> recs);

}  // namespace geomatch
