#include "geomatch/schema.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"

namespace geomatch {

using json = nlohmann::ordered_json;

Schema::Schema(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    auto& f = features_[i];
    if (f.name.empty()) throw SchemaError("feature " + std::to_string(i) + " has an empty name");
    for (std::size_t j = 0; j < i; ++j) {
      if (features_[j].name == f.name) throw SchemaError("duplicate feature: " + f.name);
    }
    if (f.kind == FeatureKind::categorical) {
      auto it = std::find(f.levels.begin(), f.levels.end(), kMissingLevel);
      if (it != f.levels.end()) f.levels.erase(it);
      f.levels.emplace_back(kMissingLevel);
      if (f.levels.size() > 64) throw SchemaError("feature " + f.name + " has more than 63 levels");
    } else {
      f.levels.clear();
    }
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw SchemaError("unknown feature: " + std::string(name));
}

std::optional<int> Schema::level_code(std::size_t feature, std::string_view level) const {
  const auto& levels = features_.at(feature).levels;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] == level) return static_cast<int>(i);
  }
  return std::nullopt;
}

int Schema::missing_code(std::size_t feature) const {
  return static_cast<int>(features_.at(feature).levels.size()) - 1;
}

const std::string& Schema::level_name(std::size_t feature, int code) const {
  return features_.at(feature).levels.at(static_cast<std::size_t>(code));
}

std::string Schema::fingerprint() const {
  std::uint64_t h = fnv1a64("schema-v1");
  for (const auto& f : features_) {
    h = fnv1a64(f.name, h);
    h = fnv1a64(f.kind == FeatureKind::numeric ? "|n|" : "|c|", h);
    for (const auto& level : f.levels) h = fnv1a64(level + ";", h);
  }
  return hash_hex(h);
}

Schema Schema::extended(const std::vector<FeatureSpec>& extra) const {
  auto all = features_;
  all.insert(all.end(), extra.begin(), extra.end());
  return Schema(std::move(all));
}

std::string Schema::to_json() const {
  json doc = json::object();
  for (const auto& f : features_) {
    json entry;
    entry["kind"] = f.kind == FeatureKind::numeric ? "numeric" : "categorical";
    if (f.kind == FeatureKind::categorical) {
      entry["levels"] = f.levels;
    } else if (!f.units.empty()) {
      entry["units"] = f.units;
    }
    doc[f.name] = entry;
  }
  return doc.dump(2);
}

namespace {

FeatureSpec parse_feature(const std::string& name, const json& entry) {
  FeatureSpec spec;
  spec.name = name;
  const auto kind = entry.at("kind").get<std::string>();
  if (kind == "numeric") {
    spec.kind = FeatureKind::numeric;
    spec.units = entry.value("units", std::string{});
  } else if (kind == "categorical") {
    spec.kind = FeatureKind::categorical;
    spec.levels = entry.at("levels").get<std::vector<std::string>>();
  } else {
    throw SchemaError("feature " + name + ": unknown kind '" + kind + "'");
  }
  return spec;
}

}  // namespace

Schema Schema::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema json: ") + e.what());
  }
  std::vector<FeatureSpec> features;
  try {
    if (doc.contains("features") && doc["features"].is_array()) {
      for (const auto& entry : doc["features"]) {
        features.push_back(parse_feature(entry.at("name").get<std::string>(), entry));
      }
    } else {
      for (auto it = doc.begin(); it != doc.end(); ++it) features.push_back(parse_feature(it.key(), it.value()));
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema json: ") + e.what());
  }
  return Schema(std::move(features));
}

void validate(const Schema& schema, const CovariateVector& x) {
  if (x.values.size() != schema.size()) {
    throw SchemaError("covariate vector has " + std::to_string(x.values.size()) + " values, schema has " +
                      std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& f = schema.feature(i);
    const double v = x.values[i];
    if (!std::isfinite(v)) throw SchemaError(f.name + ": value is not finite");
    if (f.kind == FeatureKind::categorical) {
      if (v < 0 || v >= static_cast<double>(f.levels.size()) || v != std::floor(v)) {
        throw SchemaError(f.name + ": level code out of range");
      }
    }
  }
}

}  // namespace geomatch
