#include "geomatch/model_io.hpp"

#include <cmath>
#include <limits>

#include "csv.hpp"
#include "geomatch/numeric.hpp"
#include "json_util.hpp"

namespace geomatch {

using detail::ojson;

namespace {

constexpr const char* kModelFormat = "geomatch-boosted-v1";
constexpr const char* kSetFormat = "geomatch-modelset-v1";

std::string size_limit_name(SizeLimit s) { return s == SizeLimit::depth ? "depth" : "max-splits"; }

SizeLimit parse_size_limit(const std::string& s) {
  if (s == "depth") return SizeLimit::depth;
  if (s == "max-splits") return SizeLimit::max_splits;
  throw ParseError("unknown size limit: " + s);
}

ojson params_json(const BoostParams& p) {
  return ojson{{"depth", p.depth},           {"learning_rate", p.learning_rate}, {"bag_fraction", p.bag_fraction},
               {"n_trees", p.n_trees},       {"min_node", p.min_node},           {"size_limit", size_limit_name(p.size_limit)}};
}

BoostParams params_from(const ojson& j) {
  BoostParams p;
  p.depth = j.at("depth").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.bag_fraction = j.at("bag_fraction").get<double>();
  p.n_trees = j.at("n_trees").get<int>();
  p.min_node = j.value("min_node", 10);
  p.size_limit = parse_size_limit(j.value("size_limit", std::string("depth")));
  return p;
}

std::string model_file(int id) { return "location_" + std::to_string(id) + ".model.json"; }

std::string hash_files(const std::filesystem::path& dir, const ModelSet& models) {
  std::uint64_t h = fnv1a64(detail::read_text(dir / "modelset.json"));
  for (const auto& [id, _] : models.models) h = fnv1a64(detail::read_text(dir / model_file(id)), h);
  return hash_hex(h);
}

// JSON has no infinity; an uncapped set stores null.
ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

}  // namespace

std::string model_to_json(const BoostedModel& model) {
  ojson trees = ojson::array();
  for (const auto& tree : model.trees) {
    ojson feature = ojson::array(), categorical = ojson::array(), threshold = ojson::array(),
          levels = ojson::array(), left = ojson::array(), right = ojson::array(), value = ojson::array(),
          gain = ojson::array(), count = ojson::array();
    for (const auto& n : tree.nodes()) {
      feature.push_back(n.feature);
      categorical.push_back(n.categorical ? 1 : 0);
      threshold.push_back(n.threshold);
      levels.push_back(n.left_levels);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
      gain.push_back(n.gain);
      count.push_back(n.count);
    }
    trees.push_back(ojson{{"feature", feature}, {"categorical", categorical}, {"threshold", threshold},
                          {"left_levels", levels}, {"left", left}, {"right", right}, {"value", value},
                          {"gain", gain}, {"count", count}});
  }
  ojson doc{{"format", kModelFormat},
            {"location_id", model.location_id},
            {"init_value", model.init_value},
            {"learning_rate", model.learning_rate},
            {"n_trees", model.trees.size()},
            {"params", params_json(model.params)},
            {"schema_fingerprint", model.schema_fingerprint},
            {"schema", ojson::parse(model.schema.to_json())},
            {"train_rmse", model.train_rmse},
            {"trees", trees}};
  return doc.dump();
}

BoostedModel model_from_json(std::string_view text) {
  const auto doc = detail::parse_json(text, "model json");
  try {
    if (doc.at("format").get<std::string>() != kModelFormat) throw ParseError("unsupported model format");
    BoostedModel m;
    m.location_id = doc.at("location_id").get<int>();
    m.init_value = doc.at("init_value").get<double>();
    m.learning_rate = doc.at("learning_rate").get<double>();
    m.params = params_from(doc.at("params"));
    m.schema = Schema::from_json(doc.at("schema").dump());
    m.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    if (m.schema_fingerprint != m.schema.fingerprint()) throw SchemaError("model schema fingerprint mismatch");
    m.train_rmse = doc.value("train_rmse", std::vector<double>{});
    for (const auto& t : doc.at("trees")) {
      const auto feature = t.at("feature").get<std::vector<int>>();
      const auto categorical = t.at("categorical").get<std::vector<int>>();
      const auto threshold = t.at("threshold").get<std::vector<double>>();
      const auto levels = t.at("left_levels").get<std::vector<std::uint64_t>>();
      const auto left = t.at("left").get<std::vector<int>>();
      const auto right = t.at("right").get<std::vector<int>>();
      const auto value = t.at("value").get<std::vector<double>>();
      const auto gain = t.at("gain").get<std::vector<double>>();
      const auto count = t.at("count").get<std::vector<int>>();
      std::vector<TreeNode> nodes(feature.size());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = TreeNode{feature[i], categorical.at(i) != 0, threshold.at(i), levels.at(i), left.at(i),
                            right.at(i),   value.at(i),            gain.at(i),      count.at(i)};
        const int limit = static_cast<int>(nodes.size());
        if (nodes[i].feature >= static_cast<int>(m.schema.size()) ||
            (nodes[i].feature >= 0 && (nodes[i].left <= 0 || nodes[i].right <= 0 || nodes[i].left >= limit ||
                                        nodes[i].right >= limit))) {
          throw ParseError("model json: malformed tree node");
        }
      }
      m.trees.emplace_back(std::move(nodes));
    }
    if (doc.at("n_trees").get<std::size_t>() != m.trees.size()) throw ParseError("model json: n_trees mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
}

void save_modelset(const std::filesystem::path& dir, ModelSet& models) {
  std::filesystem::create_directories(dir);
  ojson info = ojson::array();
  for (const auto& meta : models.info) {
    ojson entry{{"location_id", meta.location_id},
                {"sample_count", meta.sample_count},
                {"modeled", meta.modeled}};
    if (meta.modeled) {
      entry["file"] = model_file(meta.location_id);
      entry["params"] = params_json(meta.params);
      entry["cv_rmse"] = meta.cv_rmse;
      entry["cv_sse"] = meta.cv_sse;
      entry["total_ss"] = meta.total_ss;
      if (meta.linear_cv_sse) entry["linear_cv_sse"] = *meta.linear_cv_sse;
      ojson cells = ojson::array();
      for (const auto& c : meta.cells) {
        cells.push_back(ojson{{"params", params_json(c.params)},
                              {"cv_rmse", c.cv_rmse},
                              {"max_trees", c.max_trees},
                              {"extensions", c.extensions}});
      }
      entry["cells"] = cells;
    }
    info.push_back(entry);
  }
  ojson manifest{{"format", kSetFormat},
                 {"base_schema", ojson::parse(models.base_schema.to_json())},
                 {"model_schema_fingerprint", models.model_schema.fingerprint()},
                 {"outcome_cap", number_or_null(models.outcome_cap)},
                 {"locations", info}};
  detail::write_text(dir / "modelset.json", manifest.dump(2) + "\n");
  for (const auto& [id, model] : models.models) detail::write_text(dir / model_file(id), model_to_json(model) + "\n");
  models.content_hash = hash_files(dir, models);
}

ModelSet load_modelset(const std::filesystem::path& dir) {
  const auto doc = detail::parse_json(detail::read_text(dir / "modelset.json"), "modelset.json");
  ModelSet out;
  try {
    if (doc.at("format").get<std::string>() != kSetFormat) throw ParseError("unsupported model set format");
    out.base_schema = Schema::from_json(doc.at("base_schema").dump());
    out.model_schema = out.base_schema.extended(location_feature_specs());
    if (doc.at("model_schema_fingerprint").get<std::string>() != out.model_schema.fingerprint()) {
      throw SchemaError("model set schema fingerprint mismatch");
    }
    const auto& cap = doc.at("outcome_cap");
    out.outcome_cap = cap.is_null() ? std::numeric_limits<double>::infinity() : cap.get<double>();
    for (const auto& entry : doc.at("locations")) {
      LocationModelInfo meta;
      meta.location_id = entry.at("location_id").get<int>();
      meta.sample_count = entry.at("sample_count").get<std::size_t>();
      meta.modeled = entry.at("modeled").get<bool>();
      if (meta.modeled) {
        meta.params = params_from(entry.at("params"));
        meta.cv_rmse = entry.at("cv_rmse").get<double>();
        meta.cv_sse = entry.at("cv_sse").get<double>();
        meta.total_ss = entry.at("total_ss").get<double>();
        if (entry.contains("linear_cv_sse")) meta.linear_cv_sse = entry["linear_cv_sse"].get<double>();
        for (const auto& c : entry.at("cells")) {
          meta.cells.push_back(CellResult{params_from(c.at("params")), c.at("cv_rmse").get<double>(),
                                          c.at("max_trees").get<int>(), c.at("extensions").get<int>()});
        }
        auto model = model_from_json(detail::read_text(dir / entry.at("file").get<std::string>()));
        if (model.schema_fingerprint != out.model_schema.fingerprint()) {
          throw SchemaError("location " + std::to_string(meta.location_id) + ": model schema does not match the set");
        }
        out.models.emplace(meta.location_id, std::move(model));
      }
      out.info.push_back(std::move(meta));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("modelset.json: ") + e.what());
  }
  out.content_hash = hash_files(dir, out);
  return out;
}

void write_tuning_report(const std::filesystem::path& path, const ModelSet& models) {
  csv::Writer out(path);
  out.row({"location", "depth", "rate", "bag", "best_trees", "cv_rmse"});
  for (const auto& meta : models.info) {
    for (const auto& c : meta.cells) {
      out.row({std::to_string(meta.location_id), std::to_string(c.params.depth), format_double(c.params.learning_rate),
               format_double(c.params.bag_fraction), std::to_string(c.params.n_trees), format_double(c.cv_rmse)});
    }
  }
}

void write_importance(const std::filesystem::path& path, const ModelSet& models) {
  csv::Writer out(path);
  out.row({"location", "feature", "relative_influence"});
  for (const auto& [id, model] : models.models) {
    for (const auto& [feature, share] : variable_importance(model)) {
      out.row({std::to_string(id), feature, format_double(share)});
    }
  }
}

}  // namespace geomatch
