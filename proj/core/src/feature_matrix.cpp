#include "geomatch/feature_matrix.hpp"

namespace geomatch {

FeatureMatrix::FeatureMatrix(Schema schema, std::size_t rows)
    : schema_(std::move(schema)), rows_(rows), data_(rows * schema_.size(), 0.0) {}

FeatureMatrix FeatureMatrix::from_rows(const Schema& schema, std::span<const CovariateVector> rows) {
  FeatureMatrix m(schema, rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) m.set(r, c, rows[r].values.at(c));
  }
  return m;
}

CovariateVector FeatureMatrix::row(std::size_t row) const {
  CovariateVector out;
  out.values.resize(cols());
  for (std::size_t c = 0; c < cols(); ++c) out.values[c] = at(row, c);
  return out;
}

}  // namespace geomatch
