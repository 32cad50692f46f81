#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "geomatch/bias_audit.hpp"
#include "geomatch/error.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/manifest.hpp"
#include "geomatch/model_io.hpp"
#include "geomatch/preferences.hpp"
#include "geomatch/service.hpp"
#include "geomatch/synthetic.hpp"

namespace geomatch::cli {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << text;
}

PipelineManifest open_existing(const Context& ctx) {
  if (!fs::exists(ctx.manifest_path())) {
    throw ArtifactError("no manifest at " + ctx.manifest_path().string() + " (run generate first)");
  }
  return PipelineManifest::load(ctx.manifest_path());
}

Dataset load_cohort(const PipelineManifest& m, const std::string& name) {
  const auto schema = load_schema(m.resolve("schema"));
  const auto locations = load_locations(m.resolve("locations"));
  auto loaded = load_dataset(m.resolve(name), schema, locations);
  if (loaded.unknown_levels > 0) {
    std::cerr << "warning: " << loaded.unknown_levels << " unknown categorical values in " << name
              << " mapped to \"missing\"\n";
  }
  return std::move(loaded.dataset);
}

std::string matrix_artifact(OutcomeMode mode) {
  return mode == OutcomeMode::income ? "matrix" : "matrix." + std::string(to_string(mode));
}

fs::path output_dir(const Context& ctx, const std::string& fallback) {
  const auto dir = ctx.out ? *ctx.out : ctx.workdir / fallback;
  fs::create_directories(dir);
  return dir;
}

SimulationConfig scenario(const PipelineManifest& m, const ScenarioArgs& a) {
  SimulationConfig c;
  c.seed = m.seed();
  if (a.config_file) c = config_from_json(read_file(*a.config_file), c);
  if (a.pi_max) c.pi_max = *a.pi_max;
  if (a.compliance) c.compliance = parse_compliance_mode(*a.compliance);
  if (a.phi) c.phi = *a.phi == "none" ? std::nullopt : std::optional<int>(std::stoi(*a.phi));
  if (a.z) c.z = *a.z;
  if (a.n_runs) c.n_runs = *a.n_runs;
  if (a.outcome_mode) c.outcome_mode = parse_outcome_mode(*a.outcome_mode);
  if (!a.excluded_locations.empty()) c.excluded_locations = a.excluded_locations;
  if (a.seed) c.seed = *a.seed;
  c.validate();
  return c;
}

BacktestData backtest_data(const PipelineManifest& m, OutcomeMode mode) {
  const auto name = matrix_artifact(mode);
  if (!m.has(name)) {
    throw ArtifactError("no " + std::string(to_string(mode)) + " prediction matrix (run predict --outcome-mode " +
                        std::string(to_string(mode)) + ")");
  }
  auto clients = load_cohort(m, "clients");
  auto matrix = load_prediction_matrix(m.resolve(name));
  std::vector<PreferenceRanking> rankings;
  if (const auto p = m.resolve_optional("preferences")) {
    const auto mnl = MultinomialLogitModel::from_json(read_file(*p));
    rankings = rank_dataset(mnl, clients, m.seed());
  }
  return make_backtest_data(std::move(matrix), clients, std::move(rankings));
}

void print_summary(const SimulationSummary& s) {
  std::cout << "cohort gain " << s.mean_cohort_gain << " +/- " << s.cohort_ci95() << ", complier gain "
            << s.mean_complier_gain << " +/- " << s.complier_ci95() << ", complier fraction " << s.complier_fraction
            << " (" << s.runs.size() << " runs)\n";
}

}  // namespace

void run_generate(const Context& ctx, const GenerateArgs& args) {
  fs::create_directories(ctx.workdir);
  auto m = PipelineManifest::open(ctx.manifest_path());
  m.set_seed(args.seed);

  SyntheticConfig cfg;
  cfg.n = args.n;
  cfg.k = args.k;
  cfg.selection = parse_selection_mode(args.selection);
  cfg.v_scale = args.v_scale;
  cfg.seed = derive_seed(args.seed, 0xda7a);
  const auto [train, train_truth] = generate_synthetic(cfg);
  cfg.n = args.clients ? args.clients : args.n;
  cfg.seed = derive_seed(args.seed, 0xc11e);
  cfg.first_id = static_cast<std::int64_t>(args.n) + 1;
  const auto [clients, clients_truth] = generate_synthetic(cfg);

  const auto dir = ctx.workdir;
  write_schema(dir / "schema.json", train.schema);
  write_locations(dir / "locations.csv", train.locations);
  write_dataset(dir / "train.csv", train);
  write_ground_truth(dir / "train_truth.json", train_truth);
  write_dataset(dir / "clients.csv", clients);
  write_ground_truth(dir / "clients_truth.json", clients_truth);
  m.record("schema", dir / "schema.json");
  m.record("locations", dir / "locations.csv");
  m.record("train", dir / "train.csv");
  m.record("train_truth", dir / "train_truth.json");
  m.record("clients", dir / "clients.csv");
  m.record("clients_truth", dir / "clients_truth.json");
  m.save();
  std::cout << "generated " << train.records.size() << " training and " << clients.records.size()
            << " client records over " << args.k << " locations (" << args.selection << ")\n";
}

void run_train(const Context& ctx, const TrainArgs& args) {
  auto m = open_existing(ctx);
  const auto train = load_cohort(m, "train");

  TrainingOptions opt;
  opt.grid = args.grid;
  if (args.interaction == "max-splits") {
    opt.grid.size_limit = SizeLimit::max_splits;
  } else if (args.interaction != "depth") {
    throw ConfigError("interaction must be depth or max-splits");
  }
  opt.min_rows = args.min_rows;
  opt.cap_quantile = args.cap_quantile;
  opt.threads = ctx.threads;
  opt.seed = derive_seed(m.seed(), 0x7a1);
  opt.linear_baseline = args.linear_baseline;
  auto models = fit_location_models(train, opt);

  const auto dir = ctx.workdir / "models";
  fs::remove_all(dir);
  save_modelset(dir, models);
  write_tuning_report(ctx.workdir / "tuning.csv", models);
  write_importance(ctx.workdir / "importance.csv", models);

  const auto coarse = args.coarse.empty() ? default_coarse_features() : args.coarse;
  MnlOptions mnl_opt;
  mnl_opt.l2 = args.l2;
  const auto mnl = fit_mnl(train, coarse, mnl_opt);
  for (int id : mnl.excluded_locations()) {
    std::cerr << "warning: location " << id << " has no training landings and is left out of the preference model\n";
  }
  write_file(ctx.workdir / "preferences.json", mnl.to_json());

  m.record("modelset", dir);
  m.record("preferences", ctx.workdir / "preferences.json");
  m.save();
  std::cout << "trained " << models.models.size() << " location models; pooled CV R^2 " << pooled_cv_r2(models);
  if (args.linear_baseline) std::cout << " (linear baseline " << pooled_linear_cv_r2(models) << ")";
  std::cout << "; preference model converged in " << mnl.iterations() << " iterations\n";
}

void run_predict(const Context& ctx, const PredictArgs& args) {
  auto m = open_existing(ctx);
  const auto models = load_modelset(m.resolve("modelset"));
  const auto clients = load_cohort(m, "clients");
  PredictionOptions opt;
  opt.mode = parse_outcome_mode(args.outcome_mode);
  opt.spouse_ratio = args.spouse_ratio;
  opt.threads = ctx.threads;
  const auto matrix = build_prediction_matrix(models, clients, opt);
  const auto name = matrix_artifact(opt.mode);
  const auto path = ctx.workdir / (name + ".csv");
  write_prediction_matrix(path, matrix);
  m.record(name, path);
  m.save();
  std::cout << "wrote " << matrix.rows() << "x" << matrix.cols() << " " << to_string(opt.mode) << " matrix to "
            << path.string() << "\n";
}

void run_rank(const Context& ctx) {
  const auto m = open_existing(ctx);
  const auto clients = load_cohort(m, "clients");
  const auto matrix = load_prediction_matrix(m.resolve("matrix"));
  const auto ranks = landing_ranks(matrix, clients);
  const auto dir = output_dir(ctx, "rank");
  write_rank_report(dir / "ranks.csv", matrix, ranks, clients);
  double total = 0.0;
  std::size_t counted = 0;
  for (int r : ranks) {
    if (r > 0) {
      total += r;
      ++counted;
    }
  }
  if (const auto p = m.resolve_optional("preferences")) {
    const auto mnl = MultinomialLogitModel::from_json(read_file(*p));
    const auto rankings = rank_dataset(mnl, clients, m.seed());
    write_preference_report(dir / "preferences.csv", clients, rankings);
  }
  std::cout << "mean landing rank " << (counted ? total / static_cast<double>(counted) : 0.0) << " of "
            << matrix.cols() << " over " << counted << " clients\n";
}

void run_simulate(const Context& ctx, const ScenarioArgs& args) {
  const auto m = open_existing(ctx);
  const auto config = scenario(m, args);
  const auto data = backtest_data(m, config.outcome_mode);
  const auto summary = simulate(data, config, ctx.threads);
  const auto dir = output_dir(ctx, "simulate");
  write_summary(dir, summary);
  print_summary(summary);
}

void run_sweep(const Context& ctx, const ScenarioArgs& args, const SweepArgs& sw) {
  const auto m = open_existing(ctx);
  const auto base = scenario(m, args);
  std::vector<std::optional<int>> phis;
  for (const auto& p : sw.phi_values) phis.push_back(p == "none" ? std::nullopt : std::optional<int>(std::stoi(p)));
  const auto configs = sweep_grid(base, sw.pi_values, phis);
  const auto data = backtest_data(m, base.outcome_mode);
  const auto rows = sweep(data, configs, ctx.threads);
  const auto dir = output_dir(ctx, "sweep");
  write_sweep(dir / "sweep.csv", rows);
  std::cout << "wrote " << rows.size() << " scenarios to " << (dir / "sweep.csv").string() << "\n";
}

void run_loo(const Context& ctx, const ScenarioArgs& args) {
  const auto m = open_existing(ctx);
  const auto base = scenario(m, args);
  const auto data = backtest_data(m, base.outcome_mode);
  const auto result = leave_one_out(data, base, ctx.threads);
  const auto dir = output_dir(ctx, "loo");
  write_leave_one_out(dir / "loo.csv", result);
  std::cout << "leave-one-out mean gain " << result.mean_gain << ", range [" << result.interval_low << ", "
            << result.interval_high << "] over " << result.rows.size() << " exclusions\n";
}

void run_subset(const Context& ctx, const ScenarioArgs& args, const SubsetArgs& sub) {
  const auto m = open_existing(ctx);
  const auto base = scenario(m, args);
  const auto data = backtest_data(m, base.outcome_mode);
  const auto rule = parse_removal_rule(sub.rule);
  const auto summary = subset_removal(data, base, rule, sub.thresholds, ctx.threads);
  const auto dir = output_dir(ctx, "subset-" + sub.rule);
  write_summary(dir, summary);
  print_summary(summary);
}

void run_audit(const Context& ctx, const AuditArgs& args) {
  const auto m = open_existing(ctx);
  if (args.cohort != "train" && args.cohort != "clients") throw ConfigError("cohort must be train or clients");
  const auto data = load_cohort(m, args.cohort);
  const auto truth = load_ground_truth(m.resolve(args.cohort + "_truth"));
  const auto report = audit(data, truth, args.strata, args.min_cell, ctx.threads);
  const auto dir = output_dir(ctx, "audit");
  write_bias_report(dir / "bias_report.csv", report);
  std::size_t interior = 0;
  for (const auto& c : report.cells) interior += c.interior() ? 1 : 0;
  std::cout << "audited " << report.cells.size() << " cells (" << interior << " interior)\n";
  if (args.models) {
    const auto models = load_modelset(m.resolve("modelset"));
    const auto cells = model_bias_check(models, data, truth, args.strata, ctx.threads);
    write_model_bias(dir / "model_bias.csv", cells);
  }
}

void run_serve(const Context& ctx, const ServeArgs& args) {
  fs::path manifest = ctx.manifest_path();
  if (const char* env = std::getenv("GEOMATCH_MANIFEST"); env && *env) manifest = env;
  std::string bind = "127.0.0.1:8080";
  if (const char* env = std::getenv("GEOMATCH_BIND"); env && *env) bind = env;
  if (args.bind) bind = *args.bind;
  const auto [host, port] = parse_bind_address(bind);

  ServiceOptions opt;
  opt.max_simulation_runs = args.max_runs;
  opt.bearer_token = args.token;
  RecommendationService service(load_service_context(manifest), opt);
  HttpServer server(service);
  const int bound = server.bind(host, port);
  std::cout << "serving on " << host << ":" << bound << " (model " << service.model_hash() << ")" << std::endl;
  server.listen();
}

}  // namespace geomatch::cli
