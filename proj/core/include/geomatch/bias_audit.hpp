#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geomatch/dataset.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/synthetic.hpp"

namespace geomatch {

// Audit of the chooser/non-chooser decomposition on synthetic data where
// every potential outcome is known. For location a and stratum x:
//   theta   mean of Y(a) over the stratum
//   theta'  mean observed outcome among those who chose a
//   theta'' mean of Y(a) among those who did not
//   p       share choosing a
//   B       theta' - theta''
// This is a verification tool for synthetic worlds. Real data never carries
// theta'' and cannot be audited this way.

inline constexpr std::size_t kAuditMinCell = 50;

struct BiasCell {
  int location_id = 0;
  std::string stratum;
  std::size_t n_choosers = 0;
  std::size_t n_nonchoosers = 0;
  double theta = 0.0;
  std::optional<double> theta_prime;         // absent when p = 0
  std::optional<double> theta_double_prime;  // absent when p = 1
  double p = 0.0;
  std::optional<double> bias_bound;   // theta' - theta''
  std::optional<double> actual_bias;  // theta' - theta
  std::optional<double> bias_se;      // standard error of bias_bound
  std::optional<double> noise_floor;  // kNoiseFloorSigmas * bias_se
  bool small_cell = false;            // either side under min_cell

  bool interior() const noexcept { return n_choosers > 0 && n_nonchoosers > 0; }
};

struct BiasReport {
  std::vector<std::string> strata_features;
  std::size_t min_cell = kAuditMinCell;
  std::vector<BiasCell> cells;
};

/// Strata are the distinct combinations of the named categorical features
/// present in the data; empty strata never appear.
BiasReport audit(const Dataset& dataset, const SyntheticGroundTruth& truth,
                 std::span<const std::string> strata_features, std::size_t min_cell = kAuditMinCell,
                 unsigned threads = 1);

struct ModelBiasCell {
  int location_id = 0;
  std::string stratum;
  std::size_t n = 0;
  double model_mean = 0.0;  // mean prediction at a over the stratum
  double theta = 0.0;
  std::optional<double> theta_prime;
  std::optional<double> bias_bound;
  double gap() const noexcept { return model_mean - theta; }
};

/// Compares per-location model predictions with ground-truth stratum means.
std::vector<ModelBiasCell> model_bias_check(const ModelSet& models, const Dataset& dataset,
                                            const SyntheticGroundTruth& truth,
                                            std::span<const std::string> strata_features, unsigned threads = 1);

void write_bias_report(const std::filesystem::path& path, const BiasReport& report);
void write_model_bias(const std::filesystem::path& path, std::span<const ModelBiasCell> cells);

}  // namespace geomatch
