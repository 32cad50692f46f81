#include "geomatch/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "csv.hpp"
#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"
#include "json_util.hpp"

namespace geomatch {

using detail::ojson;

std::vector<double> MultinomialLogitModel::encode(const CovariateVector& x) const {
  std::vector<double> row(width_, 0.0);
  row[0] = 1.0;
  std::size_t col = 1;
  for (const auto& t : terms_) {
    const double v = x.values.at(t.schema_index);
    if (t.categorical) {
      const auto level = static_cast<std::size_t>(v);
      if (level < t.levels) row[col + level] = 1.0;
      col += t.levels;
    } else {
      row[col++] = (v - t.center) / t.scale;
    }
  }
  return row;
}

namespace {

void scores_into(const std::vector<double>& coefficients, std::size_t width, std::size_t k,
                 std::span<const double> row, std::span<double> out) {
  out[0] = 0.0;
  for (std::size_t j = 1; j < k; ++j) {
    const double* w = coefficients.data() + (j - 1) * width;
    double s = 0.0;
    for (std::size_t d = 0; d < width; ++d) s += w[d] * row[d];
    out[j] = s;
  }
}

void softmax_inplace(std::span<double> s) {
  const double top = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (auto& v : s) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : s) v /= total;
}

}  // namespace

std::vector<double> MultinomialLogitModel::scores(const CovariateVector& x) const {
  const auto row = encode(x);
  std::vector<double> out(locations_.size());
  scores_into(coefficients_, width_, locations_.size(), row, out);
  return out;
}

std::vector<double> MultinomialLogitModel::probabilities(const CovariateVector& x) const {
  auto s = scores(x);
  softmax_inplace(s);
  return s;
}

double MultinomialLogitModel::coefficient_norm2() const {
  double total = 0.0;
  for (std::size_t j = 0; j + 1 < locations_.size(); ++j) {
    for (std::size_t d = 1; d < width_; ++d) total += coefficients_[j * width_ + d] * coefficients_[j * width_ + d];
  }
  return total;
}

std::vector<std::string> default_coarse_features() {
  return {"education", "birth_region", "age", "category", "prior_permit"};
}

MultinomialLogitModel fit_mnl(const Dataset& train, std::span<const std::string> coarse_features,
                              const MnlOptions& options) {
  if (options.l2 < 0) throw ConfigError("l2 must be >= 0");
  MultinomialLogitModel model;
  model.l2_ = options.l2;

  std::vector<std::size_t> landings(train.locations.size() + 1, 0);
  for (const auto& r : train.records) ++landings.at(static_cast<std::size_t>(r.landing));
  std::vector<int> column_of(train.locations.size() + 1, -1);
  for (const auto& loc : train.locations) {
    if (landings[static_cast<std::size_t>(loc.id)] > 0) {
      column_of[static_cast<std::size_t>(loc.id)] = static_cast<int>(model.locations_.size());
      model.locations_.push_back(loc.id);
    } else {
      model.excluded_.push_back(loc.id);
    }
  }
  if (model.locations_.size() < 2) throw ConfigError("preference model needs at least 2 locations with landings");

  const std::size_t n = train.records.size();
  for (const auto& name : coarse_features) {
    MultinomialLogitModel::Term t;
    t.feature = name;
    t.schema_index = train.schema.index_of(name);
    const auto& spec = train.schema.feature(t.schema_index);
    if (spec.kind == FeatureKind::categorical) {
      t.categorical = true;
      t.levels = spec.levels.size();
      model.width_ += t.levels;
    } else {
      std::vector<double> v;
      v.reserve(n);
      for (const auto& r : train.records) v.push_back(r.covariates.values[t.schema_index]);
      t.center = mean(v);
      const double sd = std::sqrt(sample_variance(v));
      t.scale = sd > 0 ? sd : 1.0;
      model.width_ += 1;
    }
    model.terms_.push_back(t);
  }

  const std::size_t k = model.locations_.size();
  const std::size_t width = model.width_;
  const std::size_t dim = (k - 1) * width;
  std::vector<double> design(n * width);
  std::vector<std::size_t> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = model.encode(train.records[i].covariates);
    std::copy(row.begin(), row.end(), design.begin() + static_cast<std::ptrdiff_t>(i * width));
    label[i] = static_cast<std::size_t>(column_of[static_cast<std::size_t>(train.records[i].landing)]);
  }

  // Minimizes f = -(mean log-likelihood) + (l2/2) * ||w without intercepts||^2.
  std::vector<double> scratch(k);
  auto evaluate = [&](const std::vector<double>& w, std::vector<double>& grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loglik = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const double> row(design.data() + i * width, width);
      scores_into(w, width, k, row, scratch);
      const double top = *std::max_element(scratch.begin(), scratch.end());
      double total = 0.0;
      for (auto& s : scratch) total += std::exp(s - top);
      loglik += scratch[label[i]] - top - std::log(total);
      for (std::size_t j = 1; j < k; ++j) {
        const double residual = std::exp(scratch[j] - top) / total - (label[i] == j ? 1.0 : 0.0);
        double* g = grad.data() + (j - 1) * width;
        for (std::size_t d = 0; d < width; ++d) g[d] += residual * row[d];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    double penalty = 0.0;
    for (std::size_t j = 0; j + 1 < k; ++j) {
      for (std::size_t d = 0; d < width; ++d) {
        const std::size_t p = j * width + d;
        grad[p] *= inv_n;
        if (d > 0) {
          grad[p] += options.l2 * w[p];
          penalty += w[p] * w[p];
        }
      }
    }
    return -loglik * inv_n + 0.5 * options.l2 * penalty;
  };
  auto max_norm = [](const std::vector<double>& g) {
    double m = 0.0;
    for (double v : g) m = std::max(m, std::fabs(v));
    return m;
  };
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
  };

  std::vector<double> w(dim, 0.0), grad(dim), next(dim), next_grad(dim), direction(dim);
  double f = evaluate(w, grad);
  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> memory;
  constexpr std::size_t kMemory = 10;
  int iteration = 0;
  while (max_norm(grad) >= options.tolerance && iteration < options.max_iterations) {
    // Two-loop recursion for direction = -H * grad.
    direction = grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t m = memory.size(); m-- > 0;) {
      alpha[m] = memory[m].rho * dot(memory[m].s, direction);
      for (std::size_t p = 0; p < dim; ++p) direction[p] -= alpha[m] * memory[m].y[p];
    }
    if (!memory.empty()) {
      const auto& last = memory.back();
      const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
      for (auto& v : direction) v *= gamma;
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const double beta = memory[m].rho * dot(memory[m].y, direction);
      for (std::size_t p = 0; p < dim; ++p) direction[p] += (alpha[m] - beta) * memory[m].s[p];
    }
    for (auto& v : direction) v = -v;
    double slope = dot(grad, direction);
    if (!(slope < 0)) {
      memory.clear();
      for (std::size_t p = 0; p < dim; ++p) direction[p] = -grad[p];
      slope = dot(grad, direction);
    }

    double step = memory.empty() ? std::min(1.0, 1.0 / std::sqrt(dot(grad, grad))) : 1.0;
    double f_next = f;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t p = 0; p < dim; ++p) next[p] = w[p] + step * direction[p];
      f_next = evaluate(next, next_grad);
      if (f_next <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++iteration;
    if (!accepted) break;

    Pair pair{std::vector<double>(dim), std::vector<double>(dim), 0.0};
    for (std::size_t p = 0; p < dim; ++p) {
      pair.s[p] = next[p] - w[p];
      pair.y[p] = next_grad[p] - grad[p];
    }
    const double sy = dot(pair.s, pair.y);
    if (sy > 1e-16) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (memory.size() > kMemory) memory.pop_front();
    }
    w.swap(next);
    grad.swap(next_grad);
    f = f_next;
  }

  model.coefficients_ = std::move(w);
  model.iterations_ = iteration;
  model.gradient_norm_ = max_norm(grad);
  return model;
}

std::string MultinomialLogitModel::to_json() const {
  ojson terms = ojson::array();
  for (const auto& t : terms_) {
    terms.push_back(ojson{{"feature", t.feature},
                          {"schema_index", t.schema_index},
                          {"categorical", t.categorical},
                          {"levels", t.levels},
                          {"center", t.center},
                          {"scale", t.scale}});
  }
  ojson doc{{"format", "geomatch-mnl-v1"},
            {"locations", locations_},
            {"reference_location", locations_.empty() ? 0 : locations_.front()},
            {"excluded_locations", excluded_},
            {"terms", terms},
            {"width", width_},
            {"l2", l2_},
            {"iterations", iterations_},
            {"gradient_norm", gradient_norm_},
            {"coefficients", coefficients_}};
  return doc.dump(2);
}

MultinomialLogitModel MultinomialLogitModel::from_json(std::string_view text) {
  const auto doc = detail::parse_json(text, "preference model json");
  MultinomialLogitModel m;
  try {
    m.locations_ = doc.at("locations").get<std::vector<int>>();
    m.excluded_ = doc.value("excluded_locations", std::vector<int>{});
    for (const auto& t : doc.at("terms")) {
      Term term;
      term.feature = t.at("feature").get<std::string>();
      term.schema_index = t.at("schema_index").get<std::size_t>();
      term.categorical = t.at("categorical").get<bool>();
      term.levels = t.at("levels").get<std::size_t>();
      term.center = t.at("center").get<double>();
      term.scale = t.at("scale").get<double>();
      m.terms_.push_back(term);
    }
    m.width_ = doc.at("width").get<std::size_t>();
    m.l2_ = doc.at("l2").get<double>();
    m.iterations_ = doc.at("iterations").get<int>();
    m.gradient_norm_ = doc.at("gradient_norm").get<double>();
    m.coefficients_ = doc.at("coefficients").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("preference model json: ") + e.what());
  }
  if (m.locations_.size() < 2 || m.coefficients_.size() != (m.locations_.size() - 1) * m.width_) {
    throw ParseError("preference model json: coefficient matrix has the wrong shape");
  }
  return m;
}

PreferenceRanking rank_by_value(std::span<const int> locations, std::span<const double> values, Rng& rng) {
  std::vector<std::size_t> order(locations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    if (j - i > 1) rng.shuffle(std::span(order).subspan(i, j - i));
    i = j;
  }
  PreferenceRanking out;
  out.locations.reserve(order.size());
  out.values.reserve(order.size());
  for (auto i : order) {
    out.locations.push_back(locations[i]);
    out.values.push_back(values[i]);
  }
  return out;
}

PreferenceRanking rank_locations(const MultinomialLogitModel& mnl, const CovariateVector& x, Rng& rng,
                                 std::span<const int> excluded) {
  auto scores = mnl.scores(x);
  std::vector<int> ids;
  std::vector<double> kept;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const int id = mnl.locations()[j];
    if (std::find(excluded.begin(), excluded.end(), id) != excluded.end()) continue;
    ids.push_back(id);
    kept.push_back(scores[j]);
  }
  if (kept.empty()) return {};
  softmax_inplace(kept);
  return rank_by_value(ids, kept, rng);
}

bool AcceptableSet::contains(int location) const {
  return std::find(locations.begin(), locations.end(), location) != locations.end();
}

AcceptableSet acceptable_set(const PreferenceRanking& ranking, int phi) {
  if (phi < 1) throw ConfigError("phi must be >= 1");
  const auto t = std::min(static_cast<std::size_t>(phi), ranking.locations.size());
  return AcceptableSet{std::vector<int>(ranking.locations.begin(), ranking.locations.begin() + static_cast<std::ptrdiff_t>(t))};
}

std::vector<PreferenceRanking> rank_dataset(const MultinomialLogitModel& mnl, const Dataset& clients,
                                            std::uint64_t seed) {
  std::vector<PreferenceRanking> out;
  out.reserve(clients.records.size());
  for (const auto& r : clients.records) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r.id)));
    out.push_back(rank_locations(mnl, r.covariates, rng));
  }
  return out;
}

void write_preference_report(const std::filesystem::path& path, const Dataset& clients,
                             std::span<const PreferenceRanking> rankings) {
  csv::Writer out(path);
  out.row({"individual_id", "location_id", "probability", "rank"});
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    for (std::size_t r = 0; r < rankings[i].locations.size(); ++r) {
      out.row({std::to_string(clients.records.at(i).id), std::to_string(rankings[i].locations[r]),
               format_double(rankings[i].values[r]), std::to_string(r + 1)});
    }
  }
}

}  // namespace geomatch
