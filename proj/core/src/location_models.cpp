#include "geomatch/location_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geomatch/error.hpp"
#include "geomatch/linear_baseline.hpp"
#include "geomatch/parallel.hpp"
#include "geomatch/random.hpp"

namespace geomatch {

std::vector<FeatureSpec> location_feature_specs() {
  return {FeatureSpec{"population", FeatureKind::numeric, {}, "persons"},
          FeatureSpec{"unemployment_rate", FeatureKind::numeric, {}, "fraction"}};
}

CovariateVector with_location(const CovariateVector& base, const Location& location) {
  CovariateVector out = base;
  out.values.push_back(location.population);
  out.values.push_back(location.unemployment_rate);
  return out;
}

const BoostedModel& ModelSet::model(int location_id) const {
  auto it = models.find(location_id);
  if (it == models.end()) throw SchemaError("location " + std::to_string(location_id) + " is not modeled");
  return it->second;
}

std::vector<int> ModelSet::modeled_locations() const {
  std::vector<int> out;
  for (const auto& [id, _] : models) out.push_back(id);
  return out;
}

double ModelSet::predict_at(const CovariateVector& base, const Location& location) const {
  return predict(model(location.id), with_location(base, location));
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ModelSet fit_location_models(const Dataset& train, const TrainingOptions& options) {
  options.grid.validate();
  ModelSet out;
  out.base_schema = train.schema;
  out.model_schema = train.schema.extended(location_feature_specs());
  const auto outcomes = train.outcomes();
  out.outcome_cap = options.cap_quantile < 1.0 && !outcomes.empty()
                        ? empirical_quantile(outcomes, options.cap_quantile)
                        : std::numeric_limits<double>::infinity();

  const std::size_t k = train.locations.size();
  std::vector<std::vector<std::size_t>> rows_by_location(k);
  for (std::size_t i = 0; i < train.records.size(); ++i) {
    rows_by_location[static_cast<std::size_t>(train.records[i].landing - 1)].push_back(i);
  }

  std::vector<LocationModelInfo> info(k);
  std::vector<std::optional<BoostedModel>> fitted(k);
  parallel_for(k, options.threads, [&](std::size_t a) {
    const auto& location = train.locations[a];
    const auto& rows = rows_by_location[a];
    auto& meta = info[a];
    meta.location_id = location.id;
    meta.sample_count = rows.size();
    if (rows.size() < options.min_rows || rows.size() < static_cast<std::size_t>(options.grid.folds)) return;

    FeatureMatrix x(out.model_schema, rows.size());
    std::vector<double> y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& rec = train.records[rows[r]];
      const auto full = with_location(rec.covariates, location);
      for (std::size_t c = 0; c < full.values.size(); ++c) x.set(r, c, full.values[c]);
      y[r] = std::clamp(rec.outcome, 0.0, out.outcome_cap);
    }
    const auto id = static_cast<std::uint64_t>(location.id);
    const auto tuned = tune(x, y, options.grid, derive_seed(options.seed, 0x7e, id));
    auto model = fit_boosted(x, y, tuned.best, derive_seed(options.seed, 0xf1, id));
    model.location_id = location.id;

    double m = 0.0;
    for (double v : y) m += v;
    m /= static_cast<double>(y.size());
    for (double v : y) meta.total_ss += (v - m) * (v - m);
    meta.modeled = true;
    meta.params = tuned.best;
    meta.cv_rmse = tuned.cv_rmse;
    meta.cv_sse = tuned.cv_sse;
    meta.cells = tuned.cells;
    if (options.linear_baseline) meta.linear_cv_sse = linear_cv_sse(x, y, tuned.folds, options.grid.folds);
    fitted[a] = std::move(model);
  });

  for (std::size_t a = 0; a < k; ++a) {
    if (fitted[a]) out.models.emplace(train.locations[a].id, std::move(*fitted[a]));
  }
  out.info = std::move(info);
  if (out.models.empty()) {
    throw ConfigError("no location has at least " + std::to_string(options.min_rows) + " training rows");
  }
  return out;
}

double pooled_cv_r2(const ModelSet& models) {
  double sse = 0.0, ss = 0.0;
  for (const auto& meta : models.info) {
    if (!meta.modeled) continue;
    sse += meta.cv_sse;
    ss += meta.total_ss;
  }
  return ss > 0 ? 1.0 - sse / ss : 0.0;
}

double pooled_linear_cv_r2(const ModelSet& models) {
  double sse = 0.0, ss = 0.0;
  for (const auto& meta : models.info) {
    if (!meta.modeled) continue;
    if (!meta.linear_cv_sse) throw ConfigError("model set was trained without the linear baseline");
    sse += *meta.linear_cv_sse;
    ss += meta.total_ss;
  }
  return ss > 0 ? 1.0 - sse / ss : 0.0;
}

}  // namespace geomatch
