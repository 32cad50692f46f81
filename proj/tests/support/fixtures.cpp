#include "fixtures.hpp"

#include <atomic>
#include <unistd.h>

namespace geomatch::fixtures {

TuningGrid quick_grid() {
  TuningGrid g;
  g.depths = {3};
  g.learning_rates = {0.1};
  g.bag_fractions = {0.8};
  g.initial_max_trees = 60;
  g.extension_step = 40;
  g.proximity_threshold = 10;
  g.tree_ceiling = 300;
  g.folds = 3;
  return g;
}

namespace {

SmallPipeline build() {
  SmallPipeline p;
  SyntheticConfig cfg;
  cfg.n = 1500;
  cfg.k = 6;
  cfg.seed = 11;
  std::tie(p.train, p.train_truth) = generate_synthetic(cfg);
  cfg.n = 400;
  cfg.seed = 12;
  cfg.first_id = 100001;
  std::tie(p.clients, p.clients_truth) = generate_synthetic(cfg);

  TrainingOptions opt;
  opt.grid = quick_grid();
  opt.seed = 5;
  opt.threads = 2;
  p.models = fit_location_models(p.train, opt);
  p.models.content_hash = "test-models";
  p.mnl = fit_mnl(p.train, default_coarse_features());
  p.matrix = build_prediction_matrix(p.models, p.clients);
  p.rankings = rank_dataset(p.mnl, p.clients, 3);
  return p;
}

}  // namespace

BacktestData SmallPipeline::backtest() const { return make_backtest_data(matrix, clients, rankings); }

const SmallPipeline& small_pipeline() {
  static const SmallPipeline pipeline = build();
  return pipeline;
}

std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("geomatch-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace geomatch::fixtures
