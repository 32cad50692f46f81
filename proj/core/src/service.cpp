#include "geomatch/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include <httplib.h>

#include "geomatch/manifest.hpp"
#include "geomatch/model_io.hpp"
#include "json_util.hpp"

namespace geomatch {

using detail::ojson;

ServiceContext load_service_context(const std::filesystem::path& manifest_path) {
  const auto manifest = PipelineManifest::load(manifest_path);
  ServiceContext ctx;
  ctx.models = load_modelset(manifest.resolve("modelset"));
  ctx.locations = load_locations(manifest.resolve("locations"));
  if (const auto p = manifest.resolve_optional("preferences")) {
    ctx.preferences = MultinomialLogitModel::from_json(detail::read_text(*p));
  }
  const auto clients_path = manifest.resolve_optional("clients");
  const auto matrix_path = manifest.resolve_optional("matrix");
  if (clients_path && matrix_path) {
    auto clients = load_dataset(*clients_path, ctx.models.base_schema, ctx.locations).dataset;
    auto matrix = load_prediction_matrix(*matrix_path);
    std::vector<PreferenceRanking> rankings;
    if (ctx.preferences) rankings = rank_dataset(*ctx.preferences, clients, manifest.seed());
    ctx.backtest = make_backtest_data(std::move(matrix), clients, std::move(rankings));
  }
  return ctx;
}

std::string profile_json(const Schema& schema, const CovariateVector& x) {
  ojson j = ojson::object();
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& spec = schema.feature(f);
    if (spec.kind == FeatureKind::categorical) {
      j[spec.name] = schema.level_name(f, static_cast<int>(x.values.at(f)));
    } else {
      j[spec.name] = x.values.at(f);
    }
  }
  return j.dump();
}

namespace {

CovariateVector profile_from(const Schema& schema, const ojson& j) {
  if (!j.is_object()) throw ProfileError({"profile"}, "profile must be a JSON object");
  std::vector<std::string> bad;
  CovariateVector x;
  x.values.assign(schema.size(), 0.0);
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& spec = schema.feature(f);
    const auto it = j.find(spec.name);
    if (spec.kind == FeatureKind::categorical) {
      if (it == j.end() || it->is_null() || (it->is_string() && it->get<std::string>().empty())) {
        x.values[f] = schema.missing_code(f);
      } else if (!it->is_string()) {
        bad.push_back(spec.name);
      } else if (const auto code = schema.level_code(f, it->get<std::string>())) {
        x.values[f] = *code;
      } else {
        bad.push_back(spec.name);
      }
    } else {
      if (it == j.end() || !it->is_number() || !std::isfinite(it->get<double>())) {
        bad.push_back(spec.name);
      } else {
        x.values[f] = it->get<double>();
      }
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (!schema.find(key)) bad.push_back(key);
  }
  if (!bad.empty()) {
    std::string msg = "invalid profile fields:";
    for (const auto& b : bad) msg += " " + b;
    throw ProfileError(bad, msg);
  }
  return x;
}

HttpResponse reply(int status, ojson body, const std::string& hash) {
  body["model_hash"] = hash;
  return {status, body.dump()};
}

HttpResponse failure(int status, const std::string& message, const std::string& hash,
                     const std::vector<std::string>& fields = {}) {
  ojson body{{"error", message}};
  if (!fields.empty()) body["fields"] = fields;
  return reply(status, std::move(body), hash);
}

struct Common {
  CovariateVector profile;
  PredictionOptions options;
  int case_size = 1;
};

Common common_fields(const ModelSet& models, const ojson& req, double spouse_ratio) {
  Common c;
  if (!req.contains("profile")) throw ProfileError({"profile"}, "request has no profile");
  c.profile = profile_from(models.base_schema, req.at("profile"));
  c.options.spouse_ratio = spouse_ratio;
  if (req.contains("outcome_mode")) {
    if (!req.at("outcome_mode").is_string()) throw ProfileError({"outcome_mode"}, "outcome_mode must be a string");
    try {
      c.options.mode = parse_outcome_mode(req.at("outcome_mode").get<std::string>());
    } catch (const ConfigError& e) {
      throw ProfileError({"outcome_mode"}, e.what());
    }
  }
  if (req.contains("case_size")) {
    if (!req.at("case_size").is_number_integer() || req.at("case_size").get<int>() < 1) {
      throw ProfileError({"case_size"}, "case_size must be an integer >= 1");
    }
    c.case_size = req.at("case_size").get<int>();
  }
  return c;
}

}  // namespace

CovariateVector parse_profile(const Schema& schema, std::string_view json_object) {
  return profile_from(schema, detail::parse_json(json_object, "profile"));
}

RecommendationService::RecommendationService(ServiceContext context, ServiceOptions options)
    : context_(std::move(context)),
      options_(std::move(options)),
      workers_(std::make_unique<std::counting_semaphore<64>>(std::clamp<std::ptrdiff_t>(options_.simulation_workers, 1, 64))) {}

HttpResponse RecommendationService::handle(std::string_view method, std::string_view path, std::string_view body,
                                           std::string_view authorization) const {
  const auto& hash = model_hash();
  if (options_.bearer_token && authorization != "Bearer " + *options_.bearer_token) {
    return failure(401, "missing or invalid bearer token", hash);
  }
  const bool get = method == "GET";
  const bool post = method == "POST";
  try {
    if (path == "/health") return get ? health() : failure(405, "method not allowed", hash);
    if (path == "/locations") return get ? locations() : failure(405, "method not allowed", hash);
    if (path == "/schema") return get ? schema() : failure(405, "method not allowed", hash);
    if (path == "/predict") return post ? predict(body) : failure(405, "method not allowed", hash);
    if (path == "/recommend") return post ? recommend_request(body) : failure(405, "method not allowed", hash);
    if (path == "/simulate") return post ? simulate_request(body) : failure(405, "method not allowed", hash);
    return failure(404, "no such endpoint", hash);
  } catch (const ProfileError& e) {
    return failure(422, e.what(), hash, e.fields());
  } catch (const ParseError& e) {
    return failure(400, e.what(), hash);
  } catch (const nlohmann::json::exception& e) {
    return failure(400, e.what(), hash);
  } catch (const ConfigError& e) {
    return failure(422, e.what(), hash);
  } catch (const std::exception& e) {
    return failure(500, e.what(), hash);
  }
}

HttpResponse RecommendationService::health() const {
  return reply(200, ojson{{"status", "ok"}, {"modeled_locations", context_.models.models.size()},
                          {"simulate", context_.backtest.has_value()}},
               model_hash());
}

HttpResponse RecommendationService::locations() const {
  ojson list = ojson::array();
  for (const auto& loc : context_.locations) {
    list.push_back(ojson{{"id", loc.id},
                         {"name", loc.name},
                         {"population", loc.population},
                         {"unemployment_rate", loc.unemployment_rate},
                         {"annual_rent", loc.annual_rent},
                         {"growth_rate", loc.growth_rate},
                         {"modeled", context_.models.is_modeled(loc.id)}});
  }
  return reply(200, ojson{{"locations", list}}, model_hash());
}

HttpResponse RecommendationService::schema() const {
  return reply(200, ojson{{"schema", ojson::parse(context_.models.base_schema.to_json())}}, model_hash());
}

HttpResponse RecommendationService::predict(std::string_view body) const {
  const auto req = detail::parse_json(body, "request body");
  const auto c = common_fields(context_.models, req, options_.spouse_ratio);
  const auto ids = context_.models.modeled_locations();
  const auto row = prediction_row(context_.models, context_.locations, c.profile, c.case_size, c.options);
  ojson preds = ojson::array();
  for (std::size_t j = 0; j < ids.size(); ++j) {
    preds.push_back(ojson{{"location_id", ids[j]}, {"predicted_value", row[j]}});
  }
  return reply(200, ojson{{"outcome_mode", to_string(c.options.mode)}, {"predictions", preds}}, model_hash());
}

HttpResponse RecommendationService::recommend_request(std::string_view body) const {
  const auto req = detail::parse_json(body, "request body");
  const auto c = common_fields(context_.models, req, options_.spouse_ratio);
  const auto ids = context_.models.modeled_locations();

  std::vector<int> unacceptable;
  if (req.contains("unacceptable")) {
    const auto& u = req.at("unacceptable");
    if (!u.is_array()) throw ProfileError({"unacceptable"}, "unacceptable must be an array of location ids");
    std::set<int> known;
    for (const auto& loc : context_.locations) known.insert(loc.id);
    for (const auto& v : u) {
      if (!v.is_number_integer() || !known.count(v.get<int>())) {
        throw ProfileError({"unacceptable"}, "unacceptable lists an unknown location");
      }
      unacceptable.push_back(v.get<int>());
    }
  }
  int z = 3;
  if (req.contains("z")) {
    if (!req.at("z").is_number_integer() || req.at("z").get<int>() < 1) throw ProfileError({"z"}, "z must be >= 1");
    z = req.at("z").get<int>();
  }
  std::optional<int> phi;
  if (req.contains("phi") && !req.at("phi").is_null()) {
    if (!req.at("phi").is_number_integer() || req.at("phi").get<int>() < 1) {
      throw ProfileError({"phi"}, "phi must be >= 1");
    }
    if (!context_.preferences) throw ProfileError({"phi"}, "phi needs a preference model, none is loaded");
    phi = req.at("phi").get<int>();
  }
  std::uint64_t seed = 0;
  if (req.contains("seed")) {
    if (!req.at("seed").is_number_unsigned()) throw ProfileError({"seed"}, "seed must be a non-negative integer");
    seed = req.at("seed").get<std::uint64_t>();
  }

  AcceptableSet acceptable;
  Rng rng(seed);
  if (phi) {
    acceptable = acceptable_set(rank_locations(*context_.preferences, c.profile, rng, unacceptable), *phi);
  } else {
    for (int id : ids) {
      if (std::find(unacceptable.begin(), unacceptable.end(), id) == unacceptable.end()) {
        acceptable.locations.push_back(id);
      }
    }
  }
  std::erase_if(acceptable.locations, [&](int id) { return !context_.models.is_modeled(id); });
  if (acceptable.locations.empty()) {
    throw ProfileError({"unacceptable"}, "every modeled location is marked unacceptable");
  }
  const auto row = prediction_row(context_.models, context_.locations, c.profile, c.case_size, c.options);
  const auto rec = recommend(ids, row, acceptable, z, rng);

  ojson list = ojson::array();
  for (std::size_t i = 0; i < rec.locations.size(); ++i) {
    list.push_back(ojson{{"location_id", rec.locations[i]}, {"predicted_value", rec.values[i]}});
  }
  std::sort(unacceptable.begin(), unacceptable.end());
  ojson out{{"profile", ojson::parse(profile_json(context_.models.base_schema, c.profile))},
            {"unacceptable", unacceptable},
            {"z", z},
            {"t", rec.t},
            {"outcome_mode", to_string(c.options.mode)},
            {"recommendations", list},
            {"note", kTransparencyNote}};
  return reply(200, std::move(out), model_hash());
}

HttpResponse RecommendationService::simulate_request(std::string_view body) const {
  if (!context_.backtest) return failure(503, "no client cohort is loaded for simulation", model_hash());
  SimulationConfig defaults;
  defaults.n_runs = options_.max_simulation_runs;
  defaults.outcome_mode = context_.backtest->matrix.mode;
  const auto config = config_from_json(body.empty() ? std::string_view("{}") : body, defaults);
  if (config.n_runs > options_.max_simulation_runs) {
    return failure(429, "n_runs above the per-request cap of " + std::to_string(options_.max_simulation_runs),
                   model_hash());
  }
  if (config.phi && context_.backtest->preferences.empty()) {
    throw ProfileError({"phi"}, "phi needs a preference model, none is loaded");
  }
  workers_->acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{*workers_};
  const auto summary = simulate(*context_.backtest, config);
  return reply(200, ojson::parse(summary_json(summary, false)), model_hash());
}

struct HttpServer::Impl {
  const RecommendationService& service;
  httplib::Server server;

  explicit Impl(const RecommendationService& s) : service(s) {
    auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
      const auto out = service.handle(req.method, req.path, req.body, req.get_header_value("Authorization"));
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
    server.Get(".*", bridge);
    server.Post(".*", bridge);
    server.Put(".*", bridge);
    server.Delete(".*", bridge);
  }
};

HttpServer::HttpServer(const RecommendationService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ConfigError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

std::pair<std::string, int> parse_bind_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("bind address must be host:port");
  int port = -1;
  const auto digits = text.substr(colon + 1);
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port < 0 || port > 65535) {
    throw ConfigError("bad port in bind address: " + std::string(text));
  }
  return {std::string(text.substr(0, colon)), port};
}

}  // namespace geomatch
