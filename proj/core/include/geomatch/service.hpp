#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "geomatch/backtest.hpp"
#include "geomatch/error.hpp"
#include "geomatch/location_models.hpp"
#include "geomatch/preferences.hpp"
#include "geomatch/recommender.hpp"

namespace geomatch {

/// Shown with every recommendation response.
inline constexpr std::string_view kTransparencyNote =
    "These recommendations rank locations only by predicted near-term annual employment income. "
    "They do not weigh cost of living, family ties, climate, or any other factor that may matter to you.";

struct ServiceOptions {
  int max_simulation_runs = 20;
  std::ptrdiff_t simulation_workers = 1;
  double spouse_ratio = 0.6;
  /// When set, every request must carry `Authorization: Bearer <token>`.
  std::optional<std::string> bearer_token;
};

/// Immutable state behind the service.
struct ServiceContext {
  ModelSet models;
  std::vector<Location> locations;
  std::optional<MultinomialLogitModel> preferences;
  /// Client cohort used by /simulate; absent disables the endpoint.
  std::optional<BacktestData> backtest;
};

/// Loads models, locations, the preference model and (when recorded) the
/// client cohort and prediction matrix listed in a pipeline manifest.
ServiceContext load_service_context(const std::filesystem::path& manifest);

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Transport-independent request handling. Thread-safe.
class RecommendationService {
 public:
  RecommendationService(ServiceContext context, ServiceOptions options = {});

  HttpResponse handle(std::string_view method, std::string_view path, std::string_view body,
                      std::string_view authorization = {}) const;

  const std::string& model_hash() const noexcept { return context_.models.content_hash; }
  const ServiceContext& context() const noexcept { return context_; }

 private:
  HttpResponse locations() const;
  HttpResponse schema() const;
  HttpResponse health() const;
  HttpResponse predict(std::string_view body) const;
  HttpResponse recommend_request(std::string_view body) const;
  HttpResponse simulate_request(std::string_view body) const;

  ServiceContext context_;
  ServiceOptions options_;
  std::unique_ptr<std::counting_semaphore<64>> workers_;
};

/// JSON profile (feature name -> level name or number) for a covariate vector.
std::string profile_json(const Schema& schema, const CovariateVector& x);

/// Parses a JSON profile. Absent categorical features take the "missing"
/// level. Throws ProfileError listing every invalid field.
CovariateVector parse_profile(const Schema& schema, std::string_view json_object);

class ProfileError : public Error {
 public:
  ProfileError(std::vector<std::string> fields, const std::string& message)
      : Error("profile", message), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  std::vector<std::string> fields_;
};

/// Blocking HTTP/1.1 front end for a RecommendationService.
class HttpServer {
 public:
  explicit HttpServer(const RecommendationService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds `host:port`; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses "host:port" (GEOMATCH_BIND format).
std::pair<std::string, int> parse_bind_address(std::string_view text);

}  // namespace geomatch
