#include <benchmark/benchmark.h>

#include <numeric>

#include "geomatch/backtest.hpp"
#include "geomatch/boosting.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/preferences.hpp"
#include "geomatch/recommender.hpp"
#include "geomatch/synthetic.hpp"

namespace {

using namespace geomatch;

struct Fixture {
  Dataset train;
  Dataset clients;
  ModelSet models;
  MultinomialLogitModel mnl;
  PredictionMatrix matrix;
  BacktestData backtest;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    SyntheticConfig cfg;
    cfg.n = 3000;
    cfg.k = 10;
    out.train = generate_synthetic(cfg).first;
    cfg.seed = 2;
    cfg.first_id = 3001;
    out.clients = generate_synthetic(cfg).first;
    TrainingOptions opt;
    opt.grid.depths = {4};
    opt.grid.learning_rates = {0.1};
    opt.grid.bag_fractions = {0.5};
    opt.grid.initial_max_trees = 100;
    opt.grid.tree_ceiling = 200;
    opt.grid.folds = 3;
    out.models = fit_location_models(out.train, opt);
    out.mnl = fit_mnl(out.train, default_coarse_features());
    out.matrix = build_prediction_matrix(out.models, out.clients);
    out.backtest = make_backtest_data(out.matrix, out.clients, rank_dataset(out.mnl, out.clients, 1));
    return out;
  }();
  return f;
}

FeatureMatrix design(const Dataset& d) {
  std::vector<CovariateVector> rows;
  for (const auto& r : d.records) rows.push_back(r.covariates);
  return FeatureMatrix::from_rows(d.schema, rows);
}

void BM_FitBoosted(benchmark::State& state) {
  const auto& f = fixture();
  const auto x = design(f.train);
  const auto y = f.train.outcomes();
  BoostParams p;
  p.depth = static_cast<int>(state.range(0));
  p.n_trees = 100;
  for (auto _ : state) benchmark::DoNotOptimize(fit_boosted(x, y, p, 1));
  state.SetItemsProcessed(state.iterations() * p.n_trees);
}
BENCHMARK(BM_FitBoosted)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond);

void BM_PredictionRow(benchmark::State& state) {
  const auto& f = fixture();
  const auto& x = f.clients.records.front().covariates;
  for (auto _ : state) benchmark::DoNotOptimize(prediction_row(f.models, f.clients.locations, x, 1, {}));
}
BENCHMARK(BM_PredictionRow);

void BM_Recommend(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng data(3);
  std::vector<int> ids(k);
  std::iota(ids.begin(), ids.end(), 1);
  std::vector<double> row(k);
  for (auto& v : row) v = 30000 + 9000 * data.normal();
  AcceptableSet all{ids};
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(recommend(ids, row, all, 3, rng));
}
BENCHMARK(BM_Recommend)->Arg(20)->Arg(200);

void BM_RankLocations(benchmark::State& state) {
  const auto& f = fixture();
  const auto& x = f.clients.records.front().covariates;
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(rank_locations(f.mnl, x, rng));
}
BENCHMARK(BM_RankLocations);

void BM_SimulateRun(benchmark::State& state) {
  const auto& f = fixture();
  SimulationConfig c;
  c.pi_max = 0.5;
  if (state.range(0) > 0) c.phi = static_cast<int>(state.range(0));
  const auto pi = assign_compliance(f.backtest.outcomes, c.pi_max, c.compliance);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_run(f.backtest, pi, c, ++seed));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.backtest.actual.size()));
}
BENCHMARK(BM_SimulateRun)->Arg(0)->Arg(5)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
