#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "geomatch/schema.hpp"

namespace geomatch {

/// Column-major design matrix over a schema.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(Schema schema, std::size_t rows);

  static FeatureMatrix from_rows(const Schema& schema, std::span<const CovariateVector> rows);

  const Schema& schema() const noexcept { return schema_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return schema_.size(); }

  double at(std::size_t row, std::size_t col) const { return data_[col * rows_ + row]; }
  void set(std::size_t row, std::size_t col, double value) { data_[col * rows_ + row] = value; }
  std::span<const double> column(std::size_t col) const { return {data_.data() + col * rows_, rows_}; }

  CovariateVector row(std::size_t row) const;

 private:
  Schema schema_;
  std::size_t rows_ = 0;
  std::vector<double> data_;
};

}  // namespace geomatch
