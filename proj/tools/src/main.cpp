// geomatch: command-line driver for the location recommendation pipeline.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "geomatch/error.hpp"
#include "geomatch/parallel.hpp"

namespace {

void add_scenario_flags(CLI::App* cmd, geomatch::cli::ScenarioArgs& a) {
  cmd->add_option("--config", a.config_file, "JSON scenario file; flags override its fields");
  cmd->add_option("--pi-max", a.pi_max, "Compliance at the lowest income");
  cmd->add_option("--compliance", a.compliance, "linear-in-quantile or constant");
  cmd->add_option("--phi", a.phi, "Acceptable locations per person, or none");
  cmd->add_option("--z", a.z, "Recommendations per person");
  cmd->add_option("--n-runs,--runs", a.n_runs, "Monte Carlo runs");
  cmd->add_option("--outcome-mode", a.outcome_mode, "income, rent-adjusted or joint-per-adult");
  cmd->add_option("--excluded-locations", a.excluded_locations, "Location ids removed from consideration")
      ->delimiter(',');
  cmd->add_option("--seed", a.seed, "Scenario seed (defaults to the pipeline seed)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace geomatch::cli;
  CLI::App app{"Income-based location recommendations, backtests and audits on synthetic cohorts"};
  app.require_subcommand(1);

  Context ctx;
  ctx.threads = geomatch::default_threads();
  std::string out;
  app.add_option("--workdir", ctx.workdir, "Pipeline directory holding manifest.json")->capture_default_str();
  app.add_option("--out", out, "Output directory for reports");
  app.add_option("--threads", ctx.threads, "Worker threads")->capture_default_str();

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Draw a synthetic training cohort and client cohort");
  generate->add_option("--n", gen.n, "Training records")->capture_default_str();
  generate->add_option("--clients", gen.clients, "Client records (default: same as --n)");
  generate->add_option("--k", gen.k, "Locations")->capture_default_str();
  generate->add_option("--selection", gen.selection, "observables-only, u-confounded or v-confounded")
      ->capture_default_str();
  generate->add_option("--v-scale", gen.v_scale, "Scale of the location-specific unobservable")->capture_default_str();
  generate->add_option("--seed", gen.seed, "Root seed")->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Tune and fit per-location models and the preference model");
  train->add_option("--depths", tr.grid.depths, "Interaction depths")->delimiter(',')->capture_default_str();
  train->add_option("--rates", tr.grid.learning_rates, "Learning rates")->delimiter(',')->capture_default_str();
  train->add_option("--bags", tr.grid.bag_fractions, "Bag fractions")->delimiter(',')->capture_default_str();
  train->add_option("--initial-trees", tr.grid.initial_max_trees)->capture_default_str();
  train->add_option("--extension-step", tr.grid.extension_step)->capture_default_str();
  train->add_option("--proximity", tr.grid.proximity_threshold)->capture_default_str();
  train->add_option("--tree-ceiling", tr.grid.tree_ceiling)->capture_default_str();
  train->add_option("--folds", tr.grid.folds)->capture_default_str();
  train->add_option("--min-node", tr.grid.min_node)->capture_default_str();
  train->add_option("--interaction", tr.interaction, "depth or max-splits")->capture_default_str();
  train->add_option("--min-rows", tr.min_rows)->capture_default_str();
  train->add_option("--cap-quantile", tr.cap_quantile)->capture_default_str();
  train->add_flag("--linear-baseline", tr.linear_baseline, "Also score a one-hot linear model on the same folds");
  train->add_option("--l2", tr.l2, "Preference model ridge strength")->capture_default_str();
  train->add_option("--coarse", tr.coarse, "Preference model features")->delimiter(',');

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Build the client x location prediction matrix");
  predict->add_option("--outcome-mode", pr.outcome_mode)->capture_default_str();
  predict->add_option("--spouse-ratio", pr.spouse_ratio)->capture_default_str();

  auto* rank = app.add_subcommand("rank", "Rank of each client's landing location among predictions");

  ScenarioArgs sim_args, sweep_args, loo_args, subset_args;
  auto* simulate = app.add_subcommand("simulate", "Run one backtest scenario");
  add_scenario_flags(simulate, sim_args);

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run a pi-max x phi grid of scenarios");
  add_scenario_flags(sweep, sweep_args);
  sweep->remove_option(sweep->get_option("--pi-max"));
  sweep->remove_option(sweep->get_option("--phi"));
  sweep->add_option("--pi-max", sw.pi_values, "pi-max values")->delimiter(',');
  sweep->add_option("--phi", sw.phi_values, "phi values (none allowed)")->delimiter(',');

  auto* loo = app.add_subcommand("loo", "Leave each location out in turn");
  add_scenario_flags(loo, loo_args);

  SubsetArgs sub;
  auto* subset = app.add_subcommand("subset", "Remove a rule-defined subset of locations");
  add_scenario_flags(subset, subset_args);
  subset->add_option("--rule", sub.rule, "large, large-and-growing or small")->capture_default_str();
  subset->add_option("--large-population", sub.thresholds.large_population)->capture_default_str();
  subset->add_option("--growing-population", sub.thresholds.growing_population)->capture_default_str();
  subset->add_option("--growth-rate", sub.thresholds.growth_rate)->capture_default_str();
  subset->add_option("--small-population", sub.thresholds.small_population)->capture_default_str();

  AuditArgs au;
  auto* audit = app.add_subcommand("audit", "Selection-bias audit against synthetic ground truth");
  audit->add_option("--strata", au.strata, "Categorical stratum features")->delimiter(',');
  audit->add_option("--min-cell", au.min_cell)->capture_default_str();
  audit->add_option("--cohort", au.cohort, "train or clients")->capture_default_str();
  audit->add_flag("--models", au.models, "Also compare model predictions with ground truth");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Serve predictions and recommendations over HTTP");
  serve->add_option("--bind", sv.bind, "host:port (default GEOMATCH_BIND or 127.0.0.1:8080)");
  serve->add_option("--max-runs", sv.max_runs, "Per-request simulation run cap")->capture_default_str();
  serve->add_option("--token", sv.token, "Require this bearer token");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }
  if (!out.empty()) ctx.out = out;

  try {
    if (*generate) run_generate(ctx, gen);
    else if (*train) run_train(ctx, tr);
    else if (*predict) run_predict(ctx, pr);
    else if (*rank) run_rank(ctx);
    else if (*simulate) run_simulate(ctx, sim_args);
    else if (*sweep) run_sweep(ctx, sweep_args, sw);
    else if (*loo) run_loo(ctx, loo_args);
    else if (*subset) run_subset(ctx, subset_args, sub);
    else if (*audit) run_audit(ctx, au);
    else if (*serve) run_serve(ctx, sv);
  } catch (const geomatch::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
