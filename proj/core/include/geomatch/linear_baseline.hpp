#pragma once

#include <span>

#include "geomatch/feature_matrix.hpp"

namespace geomatch {

/// Held-out sum of squared errors of ordinary least squares with an
/// intercept, standardized numeric columns and one indicator per categorical
/// level, evaluated over the given fold labels. Rank deficiency (levels
/// absent from a training fold) is resolved by the minimum-norm solution.
double linear_cv_sse(const FeatureMatrix& x, std::span<const double> y, std::span<const int> folds, int n_folds);

}  // namespace geomatch
