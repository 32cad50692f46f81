#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>
#include <vector>

#include "geomatch/dataset.hpp"

namespace geomatch {

/// How landing locations are drawn. Choice is a random-utility (Gumbel) draw
/// over locations with utility
///
///   attraction(a) + affinity(birth_region, a) [+ confounding term] + Gumbel
///
///  - observables_only: no extra term. Choice depends on X only through
///    birth_region, so U and V are independent of the landing given X.
///  - u_confounded: + kUConfounding * U * (2 * size_index(a) - 1), i.e. high-U
///    individuals favour large locations.
///  - v_confounded: + kVConfounding * V(a). Individuals pick locations where
///    their location-specific draw is high, planting a positive premium at
///    every location (V loads positively on every potential outcome).
enum class SelectionMode { observables_only, u_confounded, v_confounded };

std::string_view to_string(SelectionMode mode);
SelectionMode parse_selection_mode(std::string_view text);

struct SyntheticConfig {
  std::size_t n = 10000;
  int k = 20;
  SelectionMode selection = SelectionMode::observables_only;
  std::uint64_t seed = 1;
  /// Scale of the location-specific unobservable V. 0 makes V constant.
  double v_scale = 1.0;
  /// First record id; lets a client cohort be drawn with disjoint ids.
  std::int64_t first_id = 1;
};

struct GroundTruthEntry {
  std::int64_t id = 0;
  std::vector<double> potential_outcomes;  // Y_i(a), indexed by location id - 1
  double u = 0.0;
  std::vector<double> v;
  double noise = 0.0;

  bool operator==(const GroundTruthEntry&) const = default;
};

/// Ground truth aligned with the dataset's records (same order).
struct SyntheticGroundTruth {
  std::vector<GroundTruthEntry> entries;

  const GroundTruthEntry& for_record(std::int64_t id) const;
};

/// Generator constants. Potential outcomes (currency/year) are
///
///   Y_i(a) = max(0, m(x_i, a) + kSigmaU * U_i + kSigmaV * V_ai + eps_i)
///
/// with U, V/v_scale ~ N(0,1), eps ~ N(0, kSigmaEps^2) and m a product of
/// occupation base pay, education, a concave age profile, a prior-permit x
/// occupation interaction, gender, category, and a location factor combining
/// size, an occupation-specialty match, an education x unemployment penalty,
/// an age x size interaction and a francophone x language interaction.
inline constexpr double kSigmaU = 9000.0;
inline constexpr double kSigmaV = 7000.0;
inline constexpr double kSigmaEps = 6000.0;
inline constexpr double kUConfounding = 1.0;
inline constexpr double kVConfounding = 2.0;

/// Bias-audit noise floor used with this generator: a cell's |B| counts as
/// indistinguishable from zero when it is below kNoiseFloorSigmas standard
/// errors of the chooser/non-chooser difference in means.
inline constexpr double kNoiseFloorSigmas = 4.0;

/// Feature roster shared by every synthetic dataset.
Schema synthetic_schema();

/// Location table for K synthetic locations. Populations fall geometrically
/// from 3,000,000 to 40,000, so for K = 20 exactly four exceed 1.5 million.
std::vector<Location> synthetic_locations(int k, std::uint64_t seed);

/// Structural mean m(x, a) (before unobservables and noise).
double structural_mean(const CovariateVector& x, const Location& location);

/// Draws covariates, unobservables and potential outcomes, then landings per
/// the selection mode. Pure function of the config.
std::pair<Dataset, SyntheticGroundTruth> generate_synthetic(const SyntheticConfig& config);

void write_ground_truth(const std::filesystem::path& path, const SyntheticGroundTruth& truth);
SyntheticGroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace geomatch
