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
#include "geomatch/preferences.hpp"
#include "geomatch/recommender.hpp"

namespace geomatch {

enum class ComplianceMode { linear_in_quantile, constant };

std::string_view to_string(ComplianceMode mode);
ComplianceMode parse_compliance_mode(std::string_view text);

struct SimulationConfig {
  double pi_max = 0.1;
  ComplianceMode compliance = ComplianceMode::linear_in_quantile;
  std::optional<int> phi;  // nullopt: every location is acceptable
  int z = 3;
  int n_runs = 100;
  OutcomeMode outcome_mode = OutcomeMode::income;
  std::vector<int> excluded_locations;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Per-individual compliance probabilities. Linear mode uses
/// pi_i = pi_max * (1 - q_i) with q_i the income quantile rank.
std::vector<double> assign_compliance(std::span<const double> outcomes, double pi_max, ComplianceMode mode);

/// Everything a backtest consumes, aligned on client order.
struct BacktestData {
  PredictionMatrix matrix;
  std::vector<int> actual;                     // landing location per client
  std::vector<double> outcomes;                // observed income, drives compliance
  std::vector<PreferenceRanking> preferences;  // empty allowed when phi is never set
  std::vector<Location> locations;
  /// Grouping name -> per-client label, for subgroup summaries.
  std::vector<std::pair<std::string, std::vector<std::string>>> groupings;

  void validate() const;
};

/// Standard subgroup labels: gender, education, case_size, arrival_year, category
/// (any that the schema lacks are skipped).
std::vector<std::pair<std::string, std::vector<std::string>>> standard_groupings(const Dataset& clients);

BacktestData make_backtest_data(PredictionMatrix matrix, const Dataset& clients,
                                std::vector<PreferenceRanking> preferences);

struct SimulationRun {
  std::vector<int> chosen;
  std::vector<double> gain;
  std::vector<char> complied;
  std::size_t compliers = 0;
  std::size_t skipped = 0;  // landing location unmodeled
  std::size_t emptied = 0;  // acceptable set emptied by exclusions
  double total_gain = 0.0;

  double cohort_gain() const;
  double complier_gain() const;
};

/// One Monte Carlo draw. Each individual's variates come from
/// Rng(derive_seed(run_seed, id)): first the uniform compliance draw, then
/// any tie-break shuffles, then the uniform pick among the top z'.
SimulationRun simulate_run(const BacktestData& data, std::span<const double> compliance,
                           const SimulationConfig& config, std::uint64_t run_seed);

struct RunTrace {
  int run = 0;
  std::uint64_t seed = 0;
  double cohort_gain = 0.0;
  double complier_gain = 0.0;
  std::size_t compliers = 0;
  std::size_t skipped = 0;
  std::size_t emptied = 0;
};

struct SubgroupRow {
  std::string grouping;
  std::string level;
  std::size_t n = 0;
  double mean_gain = 0.0;
  bool suppressed = false;
};

struct LocationShift {
  int location_id = 0;
  double before = 0.0;
  double after = 0.0;  // averaged over runs
};

struct SimulationSummary {
  SimulationConfig config;
  std::size_t n = 0;
  double mean_pi = 0.0;
  double mean_cohort_gain = 0.0;
  double cohort_gain_sd = 0.0;  // across runs
  double mean_complier_gain = 0.0;
  double complier_gain_sd = 0.0;
  double complier_fraction = 0.0;
  std::vector<LocationShift> shift;
  std::vector<SubgroupRow> subgroups;
  std::vector<RunTrace> runs;
  std::vector<double> individual_gain;  // per client, averaged over runs

  /// Half-width of the normal 95% interval of the run mean.
  double cohort_ci95() const;
  double complier_ci95() const;
};

inline constexpr std::size_t kDefaultMinCell = 10;

/// Runs `n_runs` draws with run seeds derive_seed(seed, run index).
SimulationSummary simulate(const BacktestData& data, const SimulationConfig& config, unsigned threads = 1,
                           std::size_t min_cell = kDefaultMinCell);

/// Mean per-individual gain by label; levels under `min_cell` are suppressed.
std::vector<SubgroupRow> subgroup_gains(std::string_view grouping, std::span<const std::string> labels,
                                        std::span<const double> gains, std::size_t min_cell = kDefaultMinCell);

struct SweepRow {
  SimulationConfig config;
  double mean_cohort_gain = 0.0;
  double cohort_ci95 = 0.0;
  double mean_complier_gain = 0.0;
  double complier_ci95 = 0.0;
  double complier_fraction = 0.0;
};

std::vector<SweepRow> sweep(const BacktestData& data, std::span<const SimulationConfig> configs, unsigned threads = 1);

/// Cartesian product of pi_max and phi values over a base config.
std::vector<SimulationConfig> sweep_grid(const SimulationConfig& base, std::span<const double> pi_values,
                                         std::span<const std::optional<int>> phi_values);

struct LeaveOneOutRow {
  int location_id = 0;
  double mean_cohort_gain = 0.0;
  double cohort_ci95 = 0.0;
};

struct LeaveOneOutResult {
  std::vector<LeaveOneOutRow> rows;
  double mean_gain = 0.0;
  /// Envelope of the per-exclusion gains.
  double interval_low = 0.0;
  double interval_high = 0.0;
  /// Normal 95% interval of the across-exclusion mean.
  double mean_ci_low = 0.0;
  double mean_ci_high = 0.0;
};

LeaveOneOutResult leave_one_out(const BacktestData& data, const SimulationConfig& base, unsigned threads = 1);

enum class RemovalRule { large, large_and_growing, small };

std::string_view to_string(RemovalRule rule);
RemovalRule parse_removal_rule(std::string_view text);

struct RemovalThresholds {
  double large_population = 1.5e6;
  double growing_population = 1.0e6;
  double growth_rate = 0.05;
  double small_population = 1.0e5;
};

/// Locations excluded by a rule: large = population > large_population;
/// large-and-growing adds population > growing_population with growth_rate >
/// growth cutoff; small = population < small_population.
std::vector<int> removal_set(std::span<const Location> locations, RemovalRule rule, const RemovalThresholds& t = {});

/// Simulates with the rule's exclusions added. Throws ConfigError when every
/// modeled location would be excluded.
SimulationSummary subset_removal(const BacktestData& data, const SimulationConfig& base, RemovalRule rule,
                                 const RemovalThresholds& thresholds = {}, unsigned threads = 1);

std::string config_json(const SimulationConfig& config);
SimulationConfig config_from_json(std::string_view text, const SimulationConfig& defaults = {});

/// Byte-deterministic JSON (no timestamps). `detail` adds per-run traces.
std::string summary_json(const SimulationSummary& summary, bool detail = true);
void write_summary(const std::filesystem::path& dir, const SimulationSummary& summary);
void write_sweep(const std::filesystem::path& path, std::span<const SweepRow> rows);
void write_leave_one_out(const std::filesystem::path& path, const LeaveOneOutResult& result);

}  // namespace geomatch
