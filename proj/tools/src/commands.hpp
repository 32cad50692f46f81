#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geomatch/backtest.hpp"
#include "geomatch/boosting.hpp"
#include "geomatch/recommender.hpp"

namespace geomatch::cli {

struct GenerateArgs {
  std::size_t n = 10000;
  std::size_t clients = 0;  // 0: same as n
  int k = 20;
  std::string selection = "observables-only";
  double v_scale = 1.0;
  std::uint64_t seed = 1;
};

struct TrainArgs {
  TuningGrid grid;
  std::string interaction = "depth";
  std::size_t min_rows = 50;
  double cap_quantile = 0.99;
  bool linear_baseline = false;
  double l2 = 1e-3;
  std::vector<std::string> coarse;
};

struct PredictArgs {
  std::string outcome_mode = "income";
  double spouse_ratio = 0.6;
};

struct ScenarioArgs {
  std::optional<std::string> config_file;
  std::optional<double> pi_max;
  std::optional<std::string> compliance;
  std::optional<std::string> phi;
  std::optional<int> z;
  std::optional<int> n_runs;
  std::optional<std::string> outcome_mode;
  std::vector<int> excluded_locations;
  std::optional<std::uint64_t> seed;
};

struct SweepArgs {
  std::vector<double> pi_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<std::string> phi_values{"5", "10", "25", "none"};
};

struct SubsetArgs {
  std::string rule = "large";
  RemovalThresholds thresholds;
};

struct AuditArgs {
  std::vector<std::string> strata{"birth_region"};
  std::size_t min_cell = 50;
  std::string cohort = "train";
  bool models = false;
};

struct ServeArgs {
  std::optional<std::string> bind;
  int max_runs = 20;
  std::optional<std::string> token;
};

struct Context {
  std::filesystem::path workdir = "geomatch-run";
  std::optional<std::filesystem::path> out;
  unsigned threads = 1;

  std::filesystem::path manifest_path() const { return workdir / "manifest.json"; }
};

void run_generate(const Context& ctx, const GenerateArgs& args);
void run_train(const Context& ctx, const TrainArgs& args);
void run_predict(const Context& ctx, const PredictArgs& args);
void run_rank(const Context& ctx);
void run_simulate(const Context& ctx, const ScenarioArgs& args);
void run_sweep(const Context& ctx, const ScenarioArgs& args, const SweepArgs& sweep);
void run_loo(const Context& ctx, const ScenarioArgs& args);
void run_subset(const Context& ctx, const ScenarioArgs& args, const SubsetArgs& subset);
void run_audit(const Context& ctx, const AuditArgs& args);
void run_serve(const Context& ctx, const ServeArgs& args);

}  // namespace geomatch::cli
