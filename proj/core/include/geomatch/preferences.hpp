#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "geomatch/dataset.hpp"
#include "geomatch/random.hpp"

namespace geomatch {

struct MnlOptions {
  double l2 = 1e-3;  // ridge on non-intercept coefficients
  int max_iterations = 500;
  double tolerance = 1e-6;  // max-norm of the objective gradient
};

/// Multinomial logit over landing locations with one reference location
/// whose score is fixed at 0. Coarse features enter as one indicator per
/// categorical level and as standardized numeric columns.
class MultinomialLogitModel {
 public:
  struct Term {
    std::string feature;
    std::size_t schema_index = 0;
    bool categorical = false;
    std::size_t levels = 0;  // categorical: level count
    double center = 0.0;     // numeric: training mean
    double scale = 1.0;      // numeric: training sd
  };

  MultinomialLogitModel() = default;

  const std::vector<int>& locations() const noexcept { return locations_; }
  int reference_location() const { return locations_.front(); }
  const std::vector<Term>& terms() const noexcept { return terms_; }
  std::size_t width() const noexcept { return width_; }  // 1 + encoded feature dimension
  /// Row-major (locations - 1) x width, one row per non-reference location.
  const std::vector<double>& coefficients() const noexcept { return coefficients_; }
  double l2() const noexcept { return l2_; }
  int iterations() const noexcept { return iterations_; }
  double gradient_norm() const noexcept { return gradient_norm_; }
  std::vector<int> excluded_locations() const { return excluded_; }

  /// Encoded design row [1, features...].
  std::vector<double> encode(const CovariateVector& x) const;
  /// Linear scores aligned with `locations()` (reference first, = 0).
  std::vector<double> scores(const CovariateVector& x) const;
  /// Softmax of the scores, aligned with `locations()`.
  std::vector<double> probabilities(const CovariateVector& x) const;
  /// Squared L2 norm of the non-intercept coefficients.
  double coefficient_norm2() const;

  std::string to_json() const;
  static MultinomialLogitModel from_json(std::string_view text);

 private:
  friend MultinomialLogitModel fit_mnl(const Dataset&, std::span<const std::string>, const MnlOptions&);

  std::vector<int> locations_;
  std::vector<int> excluded_;
  std::vector<Term> terms_;
  std::size_t width_ = 1;
  std::vector<double> coefficients_;
  double l2_ = 0.0;
  int iterations_ = 0;
  double gradient_norm_ = 0.0;
};

/// Maximizes the mean log-likelihood minus (l2/2)*||non-intercept coefs||^2
/// with limited-memory quasi-Newton steps and a backtracking line search.
/// Locations without training landings are left out (see excluded_locations).
MultinomialLogitModel fit_mnl(const Dataset& train, std::span<const std::string> coarse_features,
                              const MnlOptions& options = {});

/// Coarse roster used for the synthetic schema.
std::vector<std::string> default_coarse_features();

/// Locations from most (rank 1) to least preferred, with their values.
struct PreferenceRanking {
  std::vector<int> locations;
  std::vector<double> values;  // same order as `locations`
};

/// Sorts descending by value; exactly equal values are permuted uniformly at
/// random with `rng`.
PreferenceRanking rank_by_value(std::span<const int> locations, std::span<const double> values, Rng& rng);

/// Ranks the model's locations by predicted landing probability.
/// `excluded` locations are dropped and the remaining probabilities renormalized.
PreferenceRanking rank_locations(const MultinomialLogitModel& mnl, const CovariateVector& x, Rng& rng,
                                 std::span<const int> excluded = {});

struct AcceptableSet {
  std::vector<int> locations;  // in preference order
  std::size_t size() const noexcept { return locations.size(); }
  bool contains(int location) const;
};

/// Top min(phi, K) ranked locations. Throws ConfigError for phi < 1.
AcceptableSet acceptable_set(const PreferenceRanking& ranking, int phi);

/// Rankings for every record, tie-break rng seeded from (seed, record id).
std::vector<PreferenceRanking> rank_dataset(const MultinomialLogitModel& mnl, const Dataset& clients,
                                            std::uint64_t seed);

/// CSV of (individual_id, location_id, probability, rank).
void write_preference_report(const std::filesystem::path& path, const Dataset& clients,
                             std::span<const PreferenceRanking> rankings);

}  // namespace geomatch
