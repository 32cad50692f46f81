#include "geomatch/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "geomatch/error.hpp"
#include "geomatch/random.hpp"

namespace geomatch {

namespace {

// Column order of synthetic_schema().
enum Feature : std::size_t {
  kAge,
  kGender,
  kEducation,
  kOccupation,
  kBirthRegion,
  kFrench,
  kPriorPermit,
  kCategory,
  kArrivalYear,
  kArrivalMonth,
};

constexpr std::array<double, 9> kOccupationBase{62000, 52000, 60000, 56000, 45000, 30000, 42000, 35000, 40000};
constexpr std::array<double, 5> kEducationFactor{0.75, 1.0, 1.15, 1.3, 0.95};
constexpr std::array<double, 4> kCategoryFactor{0.95, 1.1, 1.0, 1.0};
constexpr double kMaxPopulation = 3.0e6;
constexpr double kMinPopulation = 4.0e4;

double size_index(const Location& loc) {
  const double s = std::log(loc.population / kMinPopulation) / std::log(kMaxPopulation / kMinPopulation);
  return std::clamp(s, 0.0, 1.0);
}

int specialty(int location_id) { return (location_id - 1) % 8; }

int secondary_specialty(int location_id) {
  const int s = (3 * location_id + 1) % 8;
  return s == specialty(location_id) ? (s + 4) % 8 : s;
}

bool francophone(int location_id) { return location_id % 5 == 0; }

int code(const CovariateVector& x, Feature f) { return static_cast<int>(x.values[f]); }

template <std::size_t N>
int draw_weighted(Rng& rng, const std::array<double, N>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < N; ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  return static_cast<int>(N - 1);
}

}  // namespace

std::string_view to_string(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::observables_only: return "observables-only";
    case SelectionMode::u_confounded: return "u-confounded";
    case SelectionMode::v_confounded: return "v-confounded";
  }
  return "observables-only";
}

SelectionMode parse_selection_mode(std::string_view text) {
  if (text == "observables-only") return SelectionMode::observables_only;
  if (text == "u-confounded") return SelectionMode::u_confounded;
  if (text == "v-confounded") return SelectionMode::v_confounded;
  throw ConfigError("unknown selection mode: " + std::string(text));
}

const GroundTruthEntry& SyntheticGroundTruth::for_record(std::int64_t id) const {
  // Entries are stored in record order; ids are usually first_id + index.
  if (!entries.empty()) {
    const auto guess = id - entries.front().id;
    if (guess >= 0 && static_cast<std::size_t>(guess) < entries.size() && entries[guess].id == id) return entries[guess];
  }
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw SchemaError("no ground truth for record " + std::to_string(id));
}

Schema synthetic_schema() {
  auto numeric = [](std::string name, std::string units) {
    return FeatureSpec{std::move(name), FeatureKind::numeric, {}, std::move(units)};
  };
  auto categorical = [](std::string name, std::vector<std::string> levels) {
    return FeatureSpec{std::move(name), FeatureKind::categorical, std::move(levels), {}};
  };
  return Schema({
      numeric("age", "years"),
      categorical("gender", {"female", "male"}),
      categorical("education", {"secondary", "bachelor", "master", "doctorate"}),
      categorical("occupation", {"management", "business_finance", "natural_sciences", "health", "education_law",
                                 "sales_service", "trades_transport", "manufacturing"}),
      categorical("birth_region", {"asia", "europe", "africa", "americas", "oceania"}),
      categorical("french", {"no", "yes"}),
      categorical("prior_permit", {"no", "yes"}),
      categorical("category", {"fsw", "cec", "fst"}),
      numeric("arrival_year", "year"),
      numeric("arrival_month", "month"),
  });
}

std::vector<Location> synthetic_locations(int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("K must be at least 2");
  Rng rng(derive_seed(seed, 0x10c));
  const double decay = std::log(kMaxPopulation / kMinPopulation) / static_cast<double>(k - 1);
  std::vector<Location> out;
  for (int id = 1; id <= k; ++id) {
    Location loc;
    loc.id = id;
    loc.name = "region_" + std::string(id < 10 ? "0" : "") + std::to_string(id);
    loc.population = std::round(kMaxPopulation * std::exp(-decay * (id - 1)));
    loc.unemployment_rate = 0.04 + 0.06 * rng.uniform();
    loc.annual_rent = std::round(9000.0 + 8500.0 * size_index(loc) + 2000.0 * (rng.uniform() - 0.5));
    loc.growth_rate = -0.02 + 0.12 * rng.uniform();
    out.push_back(std::move(loc));
  }
  return out;
}

double structural_mean(const CovariateVector& x, const Location& location) {
  const int occ = code(x, kOccupation);
  const int edu = code(x, kEducation);
  const double age = x.values[kAge];
  const bool permit = code(x, kPriorPermit) == 1;
  const bool french = code(x, kFrench) == 1;

  double m = kOccupationBase[static_cast<std::size_t>(occ)];
  m *= kEducationFactor[static_cast<std::size_t>(edu)];
  m *= std::max(0.2, 1.0 - 0.0015 * (age - 40.0) * (age - 40.0));
  if (permit) m *= (occ == 3 || occ == 5 || occ == 6) ? 1.25 : 1.10;
  if (edu == 3 && occ == 2) m *= 1.4;
  if (code(x, kGender) == 1) m *= 1.08;
  m *= kCategoryFactor[static_cast<std::size_t>(code(x, kCategory))];

  const double size = size_index(location);
  double factor = 0.85 + 0.2 * size;
  if (occ == specialty(location.id)) {
    factor *= 1.30;
  } else if (occ == secondary_specialty(location.id)) {
    factor *= 1.12;
  }
  factor *= 1.0 - 1.5 * (location.unemployment_rate - 0.07) * (edu == 0 ? 2.0 : 1.0);
  factor *= 1.0 + 0.004 * (40.0 - age) * size;
  if (francophone(location.id)) factor *= french ? 1.08 : 0.95;
  return m * factor;
}

std::pair<Dataset, SyntheticGroundTruth> generate_synthetic(const SyntheticConfig& config) {
  if (config.n < 1) throw ConfigError("n must be at least 1");
  if (config.k < 2) throw ConfigError("K must be at least 2");
  if (!(config.v_scale >= 0)) throw ConfigError("v_scale must be >= 0");

  Dataset ds;
  ds.schema = synthetic_schema();
  ds.locations = synthetic_locations(config.k, config.seed);
  const auto k = static_cast<std::size_t>(config.k);

  // Location attraction and birth-region affinities depend only on the seed.
  Rng world(derive_seed(config.seed, 0xaff));
  std::vector<double> attraction(k);
  for (std::size_t a = 0; a < k; ++a) attraction[a] = 2.0 * size_index(ds.locations[a]);
  std::array<std::vector<double>, 6> affinity;
  for (auto& row : affinity) {
    row.resize(k);
    for (auto& v : row) v = 0.8 * world.normal();
  }

  Rng rng(derive_seed(config.seed, 0xda7a));
  SyntheticGroundTruth truth;
  truth.entries.reserve(config.n);
  ds.records.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    ImmigrantRecord rec;
    rec.id = config.first_id + static_cast<std::int64_t>(i);
    auto& x = rec.covariates.values;
    x.assign(ds.schema.size(), 0.0);
    x[kAge] = std::round(22.0 + 33.0 * rng.uniform());
    x[kGender] = rng.uniform() < 0.45 ? 0 : 1;
    x[kEducation] = rng.uniform() < 0.02 ? 4 : draw_weighted(rng, std::array{0.15, 0.45, 0.32, 0.08});
    x[kOccupation] = rng.uniform() < 0.01 ? 8 : draw_weighted(rng, std::array{0.10, 0.16, 0.16, 0.12, 0.10, 0.14, 0.12, 0.10});
    x[kBirthRegion] = draw_weighted(rng, std::array{0.45, 0.15, 0.15, 0.2, 0.05});
    x[kFrench] = rng.uniform() < 0.15 ? 1 : 0;
    x[kPriorPermit] = rng.uniform() < 0.4 ? 1 : 0;
    x[kCategory] = draw_weighted(rng, std::array{0.55, 0.35, 0.10});
    x[kArrivalYear] = rng.uniform() < 0.5 ? 2015 : 2016;
    x[kArrivalMonth] = 1.0 + static_cast<double>(rng.index(12));
    rec.case_size = rng.uniform() < 0.55 ? 1 : 2;

    GroundTruthEntry gt;
    gt.id = rec.id;
    gt.u = rng.normal();
    gt.v.resize(k);
    for (auto& v : gt.v) v = config.v_scale * rng.normal();
    gt.noise = kSigmaEps * rng.normal();
    gt.potential_outcomes.resize(k);
    for (std::size_t a = 0; a < k; ++a) {
      const double y = structural_mean(rec.covariates, ds.locations[a]) + kSigmaU * gt.u +
                       kSigmaV * gt.v[a] + gt.noise;
      gt.potential_outcomes[a] = std::max(0.0, y);
    }

    const auto& region_affinity = affinity[static_cast<std::size_t>(x[kBirthRegion])];
    std::size_t best = 0;
    double best_utility = -HUGE_VAL;
    for (std::size_t a = 0; a < k; ++a) {
      double utility = attraction[a] + region_affinity[a];
      if (config.selection == SelectionMode::u_confounded) {
        utility += kUConfounding * gt.u * (2.0 * size_index(ds.locations[a]) - 1.0);
      } else if (config.selection == SelectionMode::v_confounded) {
        utility += kVConfounding * gt.v[a];
      }
      utility += rng.gumbel();
      if (utility > best_utility) {
        best_utility = utility;
        best = a;
      }
    }
    rec.landing = static_cast<int>(best) + 1;
    rec.outcome = gt.potential_outcomes[best];
    const double spouse_draw = rng.normal();
    if (rec.case_size == 2 && rng.uniform() < 0.9) {
      rec.spouse_outcome = std::max(0.0, 0.55 * rec.outcome + 8000.0 * spouse_draw);
    }
    ds.records.push_back(std::move(rec));
    truth.entries.push_back(std::move(gt));
  }
  return {std::move(ds), std::move(truth)};
}

void write_ground_truth(const std::filesystem::path& path, const SyntheticGroundTruth& truth) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& e : truth.entries) {
    doc[std::to_string(e.id)] = {
        {"potential_outcomes", e.potential_outcomes}, {"u", e.u}, {"v", e.v}, {"noise", e.noise}};
  }
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << doc.dump() << '\n';
}

SyntheticGroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open " + path.string());
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  SyntheticGroundTruth truth;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    GroundTruthEntry e;
    e.id = std::stoll(it.key());
    e.potential_outcomes = it.value().at("potential_outcomes").get<std::vector<double>>();
    e.u = it.value().at("u").get<double>();
    e.v = it.value().at("v").get<std::vector<double>>();
    e.noise = it.value().value("noise", 0.0);
    truth.entries.push_back(std::move(e));
  }
  return truth;
}

}  // namespace geomatch
