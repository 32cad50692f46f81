#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geomatch {

inline constexpr std::string_view kMissingLevel = "missing";

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> levels;  // categorical only; always ends with "missing"
  std::string units;                // numeric only, informational

  bool operator==(const FeatureSpec&) const = default;
};

/// Ordered feature declarations. Categorical features always carry an
/// explicit "missing" level, appended on construction when absent.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<FeatureSpec> features);

  std::size_t size() const noexcept { return features_.size(); }
  const FeatureSpec& feature(std::size_t index) const { return features_.at(index); }
  const std::vector<FeatureSpec>& features() const noexcept { return features_; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Like `find`, but throws SchemaError naming the feature.
  std::size_t index_of(std::string_view name) const;

  std::optional<int> level_code(std::size_t feature, std::string_view level) const;
  int missing_code(std::size_t feature) const;
  const std::string& level_name(std::size_t feature, int code) const;

  /// Stable content hash over names, kinds and level lists.
  std::string fingerprint() const;

  /// Copy of this schema with `extra` features appended.
  Schema extended(const std::vector<FeatureSpec>& extra) const;

  std::string to_json() const;
  static Schema from_json(std::string_view text);

  bool operator==(const Schema&) const = default;

 private:
  std::vector<FeatureSpec> features_;
};

/// Feature values aligned with a schema. Categorical entries hold the level
/// code as an exact small integer.
struct CovariateVector {
  std::vector<double> values;

  bool operator==(const CovariateVector&) const = default;
};

/// Throws SchemaError naming the first offending feature.
void validate(const Schema& schema, const CovariateVector& x);

}  // namespace geomatch
