#include "geomatch/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "csv.hpp"
#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"
#include "geomatch/parallel.hpp"
#include "json_util.hpp"

namespace geomatch {

using detail::ojson;

std::string_view to_string(ComplianceMode mode) {
  return mode == ComplianceMode::constant ? "constant" : "linear-in-quantile";
}

ComplianceMode parse_compliance_mode(std::string_view text) {
  if (text == "linear-in-quantile" || text == "linear") return ComplianceMode::linear_in_quantile;
  if (text == "constant") return ComplianceMode::constant;
  throw ConfigError("unknown compliance mode: " + std::string(text));
}

void SimulationConfig::validate() const {
  if (!(pi_max >= 0.0 && pi_max <= 1.0)) throw ConfigError("pi-max must lie in [0, 1]");
  if (phi && *phi < 1) throw ConfigError("phi must be >= 1");
  if (z < 1) throw ConfigError("z must be >= 1");
  if (n_runs < 1) throw ConfigError("runs must be >= 1");
}

std::vector<double> assign_compliance(std::span<const double> outcomes, double pi_max, ComplianceMode mode) {
  if (!(pi_max >= 0.0 && pi_max <= 1.0)) throw ConfigError("pi-max must lie in [0, 1]");
  if (mode == ComplianceMode::constant) return std::vector<double>(outcomes.size(), pi_max);
  auto q = income_quantile_ranks(outcomes);
  for (auto& v : q) v = pi_max * (1.0 - v);
  return q;
}

void BacktestData::validate() const {
  const auto n = matrix.rows();
  if (actual.size() != n || outcomes.size() != n) throw ConfigError("backtest inputs are not aligned");
  if (!preferences.empty() && preferences.size() != n) throw ConfigError("preference rows are not aligned");
  for (const auto& g : groupings) {
    if (g.second.size() != n) throw ConfigError("grouping " + g.first + " is not aligned");
  }
  std::set<int> known;
  for (const auto& loc : locations) known.insert(loc.id);
  for (int a : actual) {
    if (!known.count(a)) throw ConfigError("landing location " + std::to_string(a) + " is unknown");
  }
}

std::vector<std::pair<std::string, std::vector<std::string>>> standard_groupings(const Dataset& clients) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  for (const char* name : {"gender", "education", "case_size", "arrival_year", "category"}) {
    std::vector<std::string> labels;
    labels.reserve(clients.records.size());
    if (std::string_view(name) == "case_size") {
      for (const auto& r : clients.records) labels.push_back(std::to_string(r.case_size));
    } else {
      const auto f = clients.schema.find(name);
      if (!f) continue;
      for (const auto& r : clients.records) labels.push_back(feature_label(clients.schema, r.covariates, *f));
    }
    out.emplace_back(name, std::move(labels));
  }
  return out;
}

BacktestData make_backtest_data(PredictionMatrix matrix, const Dataset& clients,
                                std::vector<PreferenceRanking> preferences) {
  BacktestData data;
  data.matrix = std::move(matrix);
  for (const auto& r : clients.records) {
    data.actual.push_back(r.landing);
    data.outcomes.push_back(r.outcome);
  }
  data.preferences = std::move(preferences);
  data.locations = clients.locations;
  data.groupings = standard_groupings(clients);
  data.validate();
  return data;
}

double SimulationRun::cohort_gain() const {
  return gain.empty() ? 0.0 : total_gain / static_cast<double>(gain.size());
}

double SimulationRun::complier_gain() const {
  return compliers == 0 ? 0.0 : total_gain / static_cast<double>(compliers);
}

SimulationRun simulate_run(const BacktestData& data, std::span<const double> compliance,
                           const SimulationConfig& config, std::uint64_t run_seed) {
  const auto& m = data.matrix;
  const std::size_t n = m.rows();
  if (compliance.size() != n) throw ConfigError("compliance vector is not aligned");
  if (config.phi && data.preferences.empty()) throw ConfigError("phi requires preference rankings");

  int max_id = 0;
  for (const auto& loc : data.locations) max_id = std::max(max_id, loc.id);
  for (int id : m.location_ids) max_id = std::max(max_id, id);
  std::vector<int> column(static_cast<std::size_t>(max_id) + 1, -1);
  for (std::size_t j = 0; j < m.cols(); ++j) column[static_cast<std::size_t>(m.location_ids[j])] = static_cast<int>(j);
  std::vector<char> excluded(column.size(), 0);
  for (int id : config.excluded_locations) {
    if (id >= 0 && static_cast<std::size_t>(id) < excluded.size()) excluded[static_cast<std::size_t>(id)] = 1;
  }

  SimulationRun run;
  run.chosen.assign(data.actual.begin(), data.actual.end());
  run.gain.assign(n, 0.0);
  run.complied.assign(n, 0);
  CompensatedSum total;
  AcceptableSet acceptable;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(run_seed, static_cast<std::uint64_t>(m.individual_ids[i])));
    const double u = rng.uniform();
    const int actual = data.actual[i];
    const int actual_col = column[static_cast<std::size_t>(actual)];
    if (actual_col < 0) {
      ++run.skipped;
      continue;
    }
    if (!(u < compliance[i])) continue;

    acceptable.locations.clear();
    if (config.phi) {
      const auto& ranked = data.preferences[i].locations;
      const auto t = std::min(static_cast<std::size_t>(*config.phi), ranked.size());
      for (std::size_t r = 0; r < t; ++r) acceptable.locations.push_back(ranked[r]);
    } else {
      acceptable.locations = m.location_ids;
    }
    std::erase_if(acceptable.locations, [&](int id) {
      return id < 0 || static_cast<std::size_t>(id) >= column.size() || column[static_cast<std::size_t>(id)] < 0 ||
             excluded[static_cast<std::size_t>(id)];
    });
    if (acceptable.locations.empty()) {
      ++run.emptied;
      continue;
    }
    const auto row = m.row(i);
    const auto rec = recommend(m.location_ids, row, acceptable, config.z, rng);
    const int pick = rec.locations[rng.index(rec.locations.size())];
    const double g = row[static_cast<std::size_t>(column[static_cast<std::size_t>(pick)])] -
                     row[static_cast<std::size_t>(actual_col)];
    run.chosen[i] = pick;
    run.gain[i] = g;
    run.complied[i] = 1;
    ++run.compliers;
    total.add(g);
  }
  run.total_gain = total.value();
  return run;
}

namespace {

double sd_of(std::span<const double> v) { return v.size() < 2 ? 0.0 : std::sqrt(sample_variance(v)); }

}  // namespace

double SimulationSummary::cohort_ci95() const {
  return runs.empty() ? 0.0 : 1.96 * cohort_gain_sd / std::sqrt(static_cast<double>(runs.size()));
}

double SimulationSummary::complier_ci95() const {
  return runs.empty() ? 0.0 : 1.96 * complier_gain_sd / std::sqrt(static_cast<double>(runs.size()));
}

std::vector<SubgroupRow> subgroup_gains(std::string_view grouping, std::span<const std::string> labels,
                                        std::span<const double> gains, std::size_t min_cell) {
  if (labels.size() != gains.size()) throw ConfigError("subgroup labels and gains differ in length");
  std::map<std::string, std::pair<std::size_t, CompensatedSum>> cells;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& cell = cells[labels[i]];
    ++cell.first;
    cell.second.add(gains[i]);
  }
  std::vector<SubgroupRow> out;
  for (const auto& [level, cell] : cells) {
    SubgroupRow row;
    row.grouping = std::string(grouping);
    row.level = level;
    row.n = cell.first;
    row.suppressed = cell.first < min_cell;
    if (!row.suppressed) row.mean_gain = cell.second.value() / static_cast<double>(cell.first);
    out.push_back(row);
  }
  return out;
}

SimulationSummary simulate(const BacktestData& data, const SimulationConfig& config, unsigned threads,
                           std::size_t min_cell) {
  config.validate();
  if (config.outcome_mode != data.matrix.mode) {
    throw ConfigError("scenario outcome mode " + std::string(to_string(config.outcome_mode)) +
                      " does not match the prediction matrix (" + std::string(to_string(data.matrix.mode)) + ")");
  }
  data.validate();
  const std::size_t n = data.matrix.rows();
  const auto compliance = assign_compliance(data.outcomes, config.pi_max, config.compliance);

  const auto runs = static_cast<std::size_t>(config.n_runs);
  std::vector<SimulationRun> results(runs);
  parallel_for(runs, threads, [&](std::size_t r) {
    results[r] = simulate_run(data, compliance, config, derive_seed(config.seed, r));
  });

  SimulationSummary s;
  s.config = config;
  s.n = n;
  s.mean_pi = mean(compliance);

  std::map<int, std::size_t> slot;
  for (const auto& loc : data.locations) {
    slot.emplace(loc.id, s.shift.size());
    s.shift.push_back({loc.id, 0.0, 0.0});
  }
  for (int a : data.actual) s.shift[slot.at(a)].before += 1.0;
  std::vector<double> after(s.shift.size(), 0.0);

  std::vector<double> cohort, complier, fraction;
  std::vector<CompensatedSum> individual(n);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto& run = results[r];
    cohort.push_back(run.cohort_gain());
    complier.push_back(run.complier_gain());
    fraction.push_back(n ? static_cast<double>(run.compliers) / static_cast<double>(n) : 0.0);
    s.runs.push_back({static_cast<int>(r), derive_seed(config.seed, r), run.cohort_gain(), run.complier_gain(),
                      run.compliers, run.skipped, run.emptied});
    for (std::size_t i = 0; i < n; ++i) {
      individual[i].add(run.gain[i]);
      after[slot.at(run.chosen[i])] += 1.0;
    }
  }
  for (std::size_t j = 0; j < after.size(); ++j) s.shift[j].after = after[j] / static_cast<double>(runs);
  s.mean_cohort_gain = mean(cohort);
  s.cohort_gain_sd = sd_of(cohort);
  s.mean_complier_gain = mean(complier);
  s.complier_gain_sd = sd_of(complier);
  s.complier_fraction = mean(fraction);
  s.individual_gain.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.individual_gain[i] = individual[i].value() / static_cast<double>(runs);
  for (const auto& [name, labels] : data.groupings) {
    auto rows = subgroup_gains(name, labels, s.individual_gain, min_cell);
    s.subgroups.insert(s.subgroups.end(), rows.begin(), rows.end());
  }
  return s;
}

std::vector<SweepRow> sweep(const BacktestData& data, std::span<const SimulationConfig> configs, unsigned threads) {
  if (configs.empty()) throw ConfigError("sweep needs at least one scenario");
  std::vector<SweepRow> out;
  for (const auto& c : configs) {
    const auto s = simulate(data, c, threads);
    out.push_back({c, s.mean_cohort_gain, s.cohort_ci95(), s.mean_complier_gain, s.complier_ci95(),
                   s.complier_fraction});
  }
  return out;
}

std::vector<SimulationConfig> sweep_grid(const SimulationConfig& base, std::span<const double> pi_values,
                                         std::span<const std::optional<int>> phi_values) {
  std::vector<SimulationConfig> out;
  for (const auto& phi : phi_values) {
    for (double pi : pi_values) {
      auto c = base;
      c.pi_max = pi;
      c.phi = phi;
      out.push_back(c);
    }
  }
  return out;
}

LeaveOneOutResult leave_one_out(const BacktestData& data, const SimulationConfig& base, unsigned threads) {
  const auto& ids = data.matrix.location_ids;
  if (ids.size() < 2) throw ConfigError("leave-one-out needs at least 2 modeled locations");
  LeaveOneOutResult out;
  std::vector<double> gains;
  for (int id : ids) {
    auto c = base;
    c.excluded_locations.push_back(id);
    const auto s = simulate(data, c, threads);
    out.rows.push_back({id, s.mean_cohort_gain, s.cohort_ci95()});
    gains.push_back(s.mean_cohort_gain);
  }
  out.mean_gain = mean(gains);
  const auto [lo, hi] = std::minmax_element(gains.begin(), gains.end());
  out.interval_low = *lo;
  out.interval_high = *hi;
  const double half = 1.96 * sd_of(gains) / std::sqrt(static_cast<double>(gains.size()));
  out.mean_ci_low = out.mean_gain - half;
  out.mean_ci_high = out.mean_gain + half;
  return out;
}

std::string_view to_string(RemovalRule rule) {
  switch (rule) {
    case RemovalRule::large: return "large";
    case RemovalRule::large_and_growing: return "large-and-growing";
    case RemovalRule::small: return "small";
  }
  return "large";
}

RemovalRule parse_removal_rule(std::string_view text) {
  if (text == "large") return RemovalRule::large;
  if (text == "large-and-growing") return RemovalRule::large_and_growing;
  if (text == "small") return RemovalRule::small;
  throw ConfigError("unknown removal rule: " + std::string(text));
}

std::vector<int> removal_set(std::span<const Location> locations, RemovalRule rule, const RemovalThresholds& t) {
  std::vector<int> out;
  for (const auto& loc : locations) {
    bool drop = false;
    switch (rule) {
      case RemovalRule::large:
        drop = loc.population > t.large_population;
        break;
      case RemovalRule::large_and_growing:
        drop = loc.population > t.large_population ||
               (loc.population > t.growing_population && loc.growth_rate > t.growth_rate);
        break;
      case RemovalRule::small:
        drop = loc.population < t.small_population;
        break;
    }
    if (drop) out.push_back(loc.id);
  }
  return out;
}

SimulationSummary subset_removal(const BacktestData& data, const SimulationConfig& base, RemovalRule rule,
                                 const RemovalThresholds& thresholds, unsigned threads) {
  auto c = base;
  for (int id : removal_set(data.locations, rule, thresholds)) {
    if (std::find(c.excluded_locations.begin(), c.excluded_locations.end(), id) == c.excluded_locations.end()) {
      c.excluded_locations.push_back(id);
    }
  }
  const bool any_left = std::any_of(data.matrix.location_ids.begin(), data.matrix.location_ids.end(), [&](int id) {
    return std::find(c.excluded_locations.begin(), c.excluded_locations.end(), id) == c.excluded_locations.end();
  });
  if (!any_left) throw ConfigError(std::string("rule ") + std::string(to_string(rule)) + " excludes every location");
  return simulate(data, c, threads);
}

namespace {

ojson config_object(const SimulationConfig& c) {
  return ojson{{"pi_max", c.pi_max},
               {"compliance", to_string(c.compliance)},
               {"phi", c.phi ? ojson(*c.phi) : ojson(nullptr)},
               {"z", c.z},
               {"n_runs", c.n_runs},
               {"outcome_mode", to_string(c.outcome_mode)},
               {"excluded_locations", c.excluded_locations},
               {"seed", c.seed}};
}

}  // namespace

std::string config_json(const SimulationConfig& config) { return config_object(config).dump(2); }

SimulationConfig config_from_json(std::string_view text, const SimulationConfig& defaults) {
  const auto j = detail::parse_json(text, "scenario config");
  if (!j.is_object()) throw ParseError("scenario config: expected an object");
  auto c = defaults;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "pi_max") c.pi_max = value.get<double>();
      else if (key == "compliance") c.compliance = parse_compliance_mode(value.get<std::string>());
      else if (key == "phi") c.phi = value.is_null() || (value.is_string() && value == "none")
                                         ? std::nullopt
                                         : std::optional<int>(value.get<int>());
      else if (key == "z") c.z = value.get<int>();
      else if (key == "n_runs") c.n_runs = value.get<int>();
      else if (key == "outcome_mode") c.outcome_mode = parse_outcome_mode(value.get<std::string>());
      else if (key == "excluded_locations") c.excluded_locations = value.get<std::vector<int>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("unknown scenario field: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string summary_json(const SimulationSummary& s, bool detail) {
  std::size_t skipped = 0, emptied = 0;
  for (const auto& r : s.runs) {
    skipped += r.skipped;
    emptied += r.emptied;
  }
  ojson shift = ojson::array();
  for (const auto& l : s.shift) {
    shift.push_back(ojson{{"location", l.location_id}, {"before", l.before}, {"after", l.after}});
  }
  ojson groups = ojson::array();
  for (const auto& g : s.subgroups) {
    groups.push_back(ojson{{"grouping", g.grouping},
                           {"level", g.level},
                           {"n", g.n},
                           {"mean_gain", g.suppressed ? ojson(nullptr) : ojson(g.mean_gain)},
                           {"suppressed", g.suppressed}});
  }
  ojson doc{{"config", config_object(s.config)},
            {"n", s.n},
            {"mean_pi", s.mean_pi},
            {"cohort_gain", {{"mean", s.mean_cohort_gain}, {"sd", s.cohort_gain_sd}, {"ci95", s.cohort_ci95()}}},
            {"complier_gain", {{"mean", s.mean_complier_gain}, {"sd", s.complier_gain_sd}, {"ci95", s.complier_ci95()}}},
            {"complier_fraction", s.complier_fraction},
            {"skipped", skipped},
            {"emptied", emptied},
            {"shift", shift},
            {"subgroups", groups}};
  if (detail) {
    ojson runs = ojson::array();
    for (const auto& r : s.runs) {
      runs.push_back(ojson{{"run", r.run},
                           {"seed", r.seed},
                           {"cohort_gain", r.cohort_gain},
                           {"complier_gain", r.complier_gain},
                           {"compliers", r.compliers},
                           {"skipped", r.skipped},
                           {"emptied", r.emptied}});
    }
    doc["runs"] = runs;
  }
  return doc.dump(2) + "\n";
}

void write_summary(const std::filesystem::path& dir, const SimulationSummary& s) {
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "summary.json", summary_json(s));
  {
    csv::Writer out(dir / "shift.csv");
    out.row({"location", "before", "after", "delta"});
    for (const auto& l : s.shift) {
      out.row({std::to_string(l.location_id), format_double(l.before), format_double(l.after),
               format_double(l.after - l.before)});
    }
  }
  {
    csv::Writer out(dir / "subgroups.csv");
    out.row({"grouping", "level", "n", "mean_gain", "suppressed"});
    for (const auto& g : s.subgroups) {
      out.row({g.grouping, g.level, std::to_string(g.n), g.suppressed ? "" : format_double(g.mean_gain),
               g.suppressed ? "true" : "false"});
    }
  }
  {
    csv::Writer out(dir / "runs.csv");
    out.row({"run", "seed", "cohort_gain", "complier_gain", "compliers", "skipped", "emptied"});
    for (const auto& r : s.runs) {
      out.row({std::to_string(r.run), std::to_string(r.seed), format_double(r.cohort_gain),
               format_double(r.complier_gain), std::to_string(r.compliers), std::to_string(r.skipped),
               std::to_string(r.emptied)});
    }
  }
}

void write_sweep(const std::filesystem::path& path, std::span<const SweepRow> rows) {
  csv::Writer out(path);
  out.row({"pi_max", "phi", "compliance", "outcome_mode", "z", "n_runs", "mean_gain", "gain_ci_low", "gain_ci_high",
           "complier_gain", "complier_ci_low", "complier_ci_high", "complier_fraction"});
  for (const auto& r : rows) {
    out.row({format_double(r.config.pi_max), r.config.phi ? std::to_string(*r.config.phi) : "none",
             std::string(to_string(r.config.compliance)), std::string(to_string(r.config.outcome_mode)),
             std::to_string(r.config.z), std::to_string(r.config.n_runs), format_double(r.mean_cohort_gain),
             format_double(r.mean_cohort_gain - r.cohort_ci95), format_double(r.mean_cohort_gain + r.cohort_ci95),
             format_double(r.mean_complier_gain), format_double(r.mean_complier_gain - r.complier_ci95),
             format_double(r.mean_complier_gain + r.complier_ci95), format_double(r.complier_fraction)});
  }
}

void write_leave_one_out(const std::filesystem::path& path, const LeaveOneOutResult& result) {
  csv::Writer out(path);
  out.row({"excluded_location", "mean_gain", "ci_low", "ci_high"});
  for (const auto& r : result.rows) {
    out.row({std::to_string(r.location_id), format_double(r.mean_cohort_gain),
             format_double(r.mean_cohort_gain - r.cohort_ci95), format_double(r.mean_cohort_gain + r.cohort_ci95)});
  }
  out.row({"mean", format_double(result.mean_gain), format_double(result.mean_ci_low),
           format_double(result.mean_ci_high)});
  out.row({"envelope", "", format_double(result.interval_low), format_double(result.interval_high)});
}

}  // namespace geomatch
