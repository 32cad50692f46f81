#include "geomatch/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv.hpp"
#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"
#include "geomatch/parallel.hpp"
#include "json_util.hpp"

namespace geomatch {

using detail::ojson;

std::string_view to_string(OutcomeMode mode) {
  switch (mode) {
    case OutcomeMode::income: return "income";
    case OutcomeMode::rent_adjusted: return "rent-adjusted";
    case OutcomeMode::joint_per_adult: return "joint-per-adult";
  }
  return "income";
}

OutcomeMode parse_outcome_mode(std::string_view text) {
  if (text == "income") return OutcomeMode::income;
  if (text == "rent-adjusted") return OutcomeMode::rent_adjusted;
  if (text == "joint-per-adult") return OutcomeMode::joint_per_adult;
  throw ConfigError("unknown outcome mode: " + std::string(text));
}

std::optional<std::size_t> PredictionMatrix::column_of(int location_id) const {
  const auto it = std::find(location_ids.begin(), location_ids.end(), location_id);
  if (it == location_ids.end()) return std::nullopt;
  return static_cast<std::size_t>(it - location_ids.begin());
}

namespace {

const Location& find_location(std::span<const Location> locations, int id) {
  for (const auto& loc : locations) {
    if (loc.id == id) return loc;
  }
  throw ConfigError("no attributes for location " + std::to_string(id));
}

}  // namespace

std::vector<double> prediction_row(const ModelSet& models, std::span<const Location> locations,
                                   const CovariateVector& x, int case_size, const PredictionOptions& options) {
  const auto ids = models.modeled_locations();
  std::vector<double> row;
  row.reserve(ids.size());
  for (int id : ids) {
    const Location& loc = find_location(locations, id);
    double value = models.predict_at(x, loc);
    switch (options.mode) {
      case OutcomeMode::income:
        break;
      case OutcomeMode::rent_adjusted:
        if (!std::isfinite(loc.annual_rent)) throw ConfigError("missing annual rent for location " + std::to_string(id));
        value -= loc.annual_rent;
        break;
      case OutcomeMode::joint_per_adult:
        if (case_size >= 2) value = (value + options.spouse_ratio * value) / 2.0;
        break;
    }
    row.push_back(value);
  }
  return row;
}

PredictionMatrix build_prediction_matrix(const ModelSet& models, const Dataset& clients,
                                         const PredictionOptions& options) {
  if (clients.schema.fingerprint() != models.base_schema.fingerprint()) {
    throw SchemaError("client schema does not match the model schema");
  }
  PredictionMatrix m;
  m.mode = options.mode;
  m.spouse_ratio = options.spouse_ratio;
  m.model_hash = models.content_hash;
  m.location_ids = models.modeled_locations();
  const std::size_t n = clients.records.size();
  m.individual_ids.reserve(n);
  for (const auto& r : clients.records) m.individual_ids.push_back(r.id);
  m.values.assign(n * m.location_ids.size(), 0.0);
  parallel_for(n, options.threads, [&](std::size_t i) {
    const auto& r = clients.records[i];
    const auto row = prediction_row(models, clients.locations, r.covariates, r.case_size, options);
    std::copy(row.begin(), row.end(), m.values.begin() + static_cast<std::ptrdiff_t>(i * m.location_ids.size()));
  });
  return m;
}

Recommendation recommend(std::span<const int> location_ids, std::span<const double> row,
                         const AcceptableSet& acceptable, int z, Rng& rng) {
  if (z < 1) throw ConfigError("z must be >= 1");
  std::vector<int> ids;
  std::vector<double> values;
  for (std::size_t j = 0; j < location_ids.size(); ++j) {
    if (acceptable.contains(location_ids[j])) {
      ids.push_back(location_ids[j]);
      values.push_back(row[j]);
    }
  }
  Recommendation rec;
  rec.t = ids.size();
  rec.z = z;
  if (ids.empty()) return rec;
  auto ranked = rank_by_value(ids, values, rng);
  const auto keep = std::min(static_cast<std::size_t>(z), ranked.locations.size());
  rec.locations.assign(ranked.locations.begin(), ranked.locations.begin() + static_cast<std::ptrdiff_t>(keep));
  rec.values.assign(ranked.values.begin(), ranked.values.begin() + static_cast<std::ptrdiff_t>(keep));
  return rec;
}

int landing_rank(std::span<const int> location_ids, std::span<const double> row, int actual) {
  const auto it = std::find(location_ids.begin(), location_ids.end(), actual);
  if (it == location_ids.end()) throw ConfigError("location " + std::to_string(actual) + " is not modeled");
  const double own = row[static_cast<std::size_t>(it - location_ids.begin())];
  return 1 + static_cast<int>(std::count_if(row.begin(), row.end(), [own](double v) { return v > own; }));
}

std::vector<int> landing_ranks(const PredictionMatrix& matrix, const Dataset& clients) {
  std::vector<int> ranks(matrix.rows(), 0);
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    const int actual = clients.records.at(i).landing;
    if (matrix.column_of(actual)) ranks[i] = landing_rank(matrix.location_ids, matrix.row(i), actual);
  }
  return ranks;
}

void write_rank_report(const std::filesystem::path& path, const PredictionMatrix& matrix, std::span<const int> ranks,
                       const Dataset& clients) {
  csv::Writer out(path);
  out.row({"individual_id", "landing", "rank", "locations"});
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (ranks[i] == 0) continue;
    out.row({std::to_string(matrix.individual_ids[i]), std::to_string(clients.records.at(i).landing),
             std::to_string(ranks[i]), std::to_string(matrix.cols())});
  }
}

void write_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& matrix) {
  {
    csv::Writer out(path);
    std::vector<std::string> fields{"individual_id"};
    for (int id : matrix.location_ids) fields.push_back(std::to_string(id));
    out.row(fields);
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
      fields.assign(1, std::to_string(matrix.individual_ids[i]));
      for (double v : matrix.row(i)) fields.push_back(format_double(v));
      out.row(fields);
    }
  }
  ojson side{{"mode", to_string(matrix.mode)},
             {"spouse_ratio", matrix.spouse_ratio},
             {"model_hash", matrix.model_hash},
             {"rows", matrix.rows()},
             {"cols", matrix.cols()}};
  detail::write_text(path.string() + ".json", side.dump(2) + "\n");
}

PredictionMatrix load_prediction_matrix(const std::filesystem::path& path) {
  const auto side = detail::parse_json(detail::read_text(path.string() + ".json"), "matrix sidecar");
  PredictionMatrix m;
  try {
    m.mode = parse_outcome_mode(side.at("mode").get<std::string>());
    m.spouse_ratio = side.at("spouse_ratio").get<double>();
    m.model_hash = side.at("model_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("matrix sidecar: ") + e.what());
  }
  const auto table = csv::read(path);
  if (table.header.empty() || table.header[0] != "individual_id") {
    throw SchemaError("missing required column: individual_id");
  }
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    m.location_ids.push_back(static_cast<int>(csv::parse_integer(table.header[c], "header", 1)));
  }
  m.values.reserve(table.rows.size() * m.location_ids.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) throw ParseError("matrix row " + std::to_string(r + 2) + " has wrong width");
    m.individual_ids.push_back(csv::parse_integer(row[0], "individual_id", r + 2));
    for (std::size_t c = 1; c < row.size(); ++c) m.values.push_back(csv::parse_double(row[c], table.header[c], r + 2));
  }
  return m;
}

std::string recommendation_json(const Recommendation& rec) {
  ojson j{{"id", rec.id}, {"locations", rec.locations}, {"values", rec.values}, {"t", rec.t}, {"z", rec.z}};
  return j.dump();
}

void write_recommendations(const std::filesystem::path& path, std::span<const Recommendation> recs) {
  std::ofstream out(path);
  if (!out) throw ArtifactError("cannot write " + path.string());
  for (const auto& r : recs) out << recommendation_json(r) << '\n';
}

}  // namespace geomatch
