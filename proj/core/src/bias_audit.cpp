#include "geomatch/bias_audit.hpp"

#include <cmath>
#include <map>

#include "csv.hpp"
#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"
#include "geomatch/parallel.hpp"

namespace geomatch {

namespace {

struct Strata {
  std::vector<std::string> keys;
  std::vector<std::vector<std::size_t>> members;
};

Strata stratify(const Dataset& dataset, std::span<const std::string> features) {
  std::vector<std::size_t> index;
  for (const auto& name : features) {
    const auto f = dataset.schema.index_of(name);
    if (dataset.schema.feature(f).kind != FeatureKind::categorical) {
      throw ConfigError("stratum feature " + name + " is not categorical");
    }
    index.push_back(f);
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < index.size(); ++k) {
      if (k) key += ';';
      key += features[k] + "=" + feature_label(dataset.schema, dataset.records[i].covariates, index[k]);
    }
    if (key.empty()) key = "all";
    groups[key].push_back(i);
  }
  Strata s;
  for (auto& [key, rows] : groups) {
    s.keys.push_back(key);
    s.members.push_back(std::move(rows));
  }
  return s;
}

std::vector<const GroundTruthEntry*> align(const Dataset& dataset, const SyntheticGroundTruth& truth) {
  std::vector<const GroundTruthEntry*> out;
  out.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    const auto& e = truth.for_record(r.id);
    if (e.potential_outcomes.size() != dataset.locations.size()) {
      throw ConfigError("ground truth for record " + std::to_string(r.id) + " has the wrong location count");
    }
    out.push_back(&e);
  }
  return out;
}

struct Moments {
  std::size_t n = 0;
  CompensatedSum sum;
  CompensatedSum sum_sq;

  void add(double v) {
    ++n;
    sum.add(v);
    sum_sq.add(v * v);
  }
  double mean() const { return sum.value() / static_cast<double>(n); }
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sum_sq.value() - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
  }
};

}  // namespace

BiasReport audit(const Dataset& dataset, const SyntheticGroundTruth& truth,
                 std::span<const std::string> strata_features, std::size_t min_cell, unsigned threads) {
  const auto strata = stratify(dataset, strata_features);
  const auto entries = align(dataset, truth);
  BiasReport report;
  report.strata_features.assign(strata_features.begin(), strata_features.end());
  report.min_cell = min_cell;

  const auto& locs = dataset.locations;
  std::vector<std::vector<BiasCell>> per_location(locs.size());
  parallel_for(locs.size(), threads, [&](std::size_t li) {
    const int a = locs[li].id;
    const auto col = static_cast<std::size_t>(a - 1);
    for (std::size_t s = 0; s < strata.keys.size(); ++s) {
      CompensatedSum all;
      Moments chosen, other;
      for (auto i : strata.members[s]) {
        const double y_a = entries[i]->potential_outcomes[col];
        all.add(y_a);
        if (dataset.records[i].landing == a) {
          chosen.add(dataset.records[i].outcome);
        } else {
          other.add(y_a);
        }
      }
      BiasCell cell;
      cell.location_id = a;
      cell.stratum = strata.keys[s];
      cell.n_choosers = chosen.n;
      cell.n_nonchoosers = other.n;
      const auto n = static_cast<double>(chosen.n + other.n);
      cell.theta = all.value() / n;
      cell.p = static_cast<double>(chosen.n) / n;
      if (chosen.n > 0) {
        cell.theta_prime = chosen.mean();
        cell.actual_bias = *cell.theta_prime - cell.theta;
      }
      if (other.n > 0) cell.theta_double_prime = other.mean();
      if (cell.interior()) {
        cell.bias_bound = *cell.theta_prime - *cell.theta_double_prime;
        if (chosen.n >= 2 && other.n >= 2) {
          cell.bias_se = std::sqrt(chosen.variance() / static_cast<double>(chosen.n) +
                                   other.variance() / static_cast<double>(other.n));
          cell.noise_floor = kNoiseFloorSigmas * *cell.bias_se;
        }
      }
      cell.small_cell = chosen.n < min_cell || other.n < min_cell;
      per_location[li].push_back(std::move(cell));
    }
  });
  for (auto& cells : per_location) {
    for (auto& c : cells) report.cells.push_back(std::move(c));
  }
  return report;
}

std::vector<ModelBiasCell> model_bias_check(const ModelSet& models, const Dataset& dataset,
                                            const SyntheticGroundTruth& truth,
                                            std::span<const std::string> strata_features, unsigned threads) {
  const auto strata = stratify(dataset, strata_features);
  const auto entries = align(dataset, truth);
  const auto ids = models.modeled_locations();
  std::vector<std::vector<ModelBiasCell>> per_location(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t li) {
    const int a = ids[li];
    const Location& loc = dataset.location(a);
    const auto col = static_cast<std::size_t>(a - 1);
    for (std::size_t s = 0; s < strata.keys.size(); ++s) {
      CompensatedSum predicted, all;
      Moments chosen, other;
      for (auto i : strata.members[s]) {
        const auto& r = dataset.records[i];
        predicted.add(models.predict_at(r.covariates, loc));
        const double y_a = entries[i]->potential_outcomes[col];
        all.add(y_a);
        if (r.landing == a) {
          chosen.add(r.outcome);
        } else {
          other.add(y_a);
        }
      }
      ModelBiasCell cell;
      cell.location_id = a;
      cell.stratum = strata.keys[s];
      cell.n = strata.members[s].size();
      cell.model_mean = predicted.value() / static_cast<double>(cell.n);
      cell.theta = all.value() / static_cast<double>(cell.n);
      if (chosen.n > 0) cell.theta_prime = chosen.mean();
      if (chosen.n > 0 && other.n > 0) cell.bias_bound = chosen.mean() - other.mean();
      per_location[li].push_back(std::move(cell));
    }
  });
  std::vector<ModelBiasCell> out;
  for (auto& cells : per_location) {
    for (auto& c : cells) out.push_back(std::move(c));
  }
  return out;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

void write_bias_report(const std::filesystem::path& path, const BiasReport& report) {
  csv::Writer out(path);
  out.row({"a", "stratum", "n_choosers", "n_nonchoosers", "theta", "theta_prime", "theta_double_prime", "p",
           "bias_bound", "flag", "actual_bias", "bias_se", "noise_floor"});
  for (const auto& c : report.cells) {
    std::string flag = "ok";
    if (!c.interior()) {
      flag = "boundary";
    } else if (c.small_cell) {
      flag = "small-cell";
    } else if (c.noise_floor && std::fabs(*c.bias_bound) > *c.noise_floor) {
      flag = "above-noise-floor";
    }
    out.row({std::to_string(c.location_id), c.stratum, std::to_string(c.n_choosers), std::to_string(c.n_nonchoosers),
             format_double(c.theta), opt(c.theta_prime), opt(c.theta_double_prime), format_double(c.p),
             opt(c.bias_bound), flag, opt(c.actual_bias), opt(c.bias_se), opt(c.noise_floor)});
  }
}

void write_model_bias(const std::filesystem::path& path, std::span<const ModelBiasCell> cells) {
  csv::Writer out(path);
  out.row({"a", "stratum", "n", "model_mean", "theta", "theta_prime", "bias_bound", "gap"});
  for (const auto& c : cells) {
    out.row({std::to_string(c.location_id), c.stratum, std::to_string(c.n), format_double(c.model_mean),
             format_double(c.theta), opt(c.theta_prime), opt(c.bias_bound), format_double(c.gap())});
  }
}

}  // namespace geomatch
