#include "geomatch/linear_baseline.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "geomatch/error.hpp"

namespace geomatch {

namespace {

struct Encoder {
  std::vector<std::size_t> numeric;
  std::vector<double> center, scale;
  std::vector<std::pair<std::size_t, std::size_t>> categorical;  // (feature, first column)
  std::size_t width = 1;                                         // intercept

  Encoder(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
    for (std::size_t f = 0; f < x.cols(); ++f) {
      const auto& spec = x.schema().feature(f);
      if (spec.kind == FeatureKind::numeric) {
        double m = 0.0, s = 0.0;
        for (auto r : rows) m += x.at(r, f);
        m /= static_cast<double>(rows.size());
        for (auto r : rows) s += (x.at(r, f) - m) * (x.at(r, f) - m);
        s = std::sqrt(s / static_cast<double>(rows.size()));
        numeric.push_back(f);
        center.push_back(m);
        scale.push_back(s > 0 ? s : 1.0);
        ++width;
      } else {
        categorical.emplace_back(f, width);
        width += spec.levels.size();
      }
    }
  }

  void encode(const FeatureMatrix& x, std::size_t row, Eigen::Ref<Eigen::RowVectorXd> out) const {
    out.setZero();
    out(0) = 1.0;
    for (std::size_t j = 0; j < numeric.size(); ++j) {
      out(static_cast<Eigen::Index>(1 + j)) = (x.at(row, numeric[j]) - center[j]) / scale[j];
    }
    for (const auto& [f, first] : categorical) {
      out(static_cast<Eigen::Index>(first + static_cast<std::size_t>(x.at(row, f)))) = 1.0;
    }
  }
};

}  // namespace

double linear_cv_sse(const FeatureMatrix& x, std::span<const double> y, std::span<const int> folds, int n_folds) {
  if (y.size() != x.rows() || folds.size() != x.rows()) throw ConfigError("linear baseline inputs differ in length");
  double sse = 0.0;
  for (int f = 0; f < n_folds; ++f) {
    std::vector<std::size_t> train, hold;
    for (std::size_t r = 0; r < x.rows(); ++r) (folds[r] == f ? hold : train).push_back(r);
    if (train.empty() || hold.empty()) continue;
    const Encoder enc(x, train);
    const auto width = static_cast<Eigen::Index>(enc.width);
    Eigen::MatrixXd design(static_cast<Eigen::Index>(train.size()), width);
    Eigen::VectorXd target(static_cast<Eigen::Index>(train.size()));
    Eigen::RowVectorXd row(width);
    for (std::size_t i = 0; i < train.size(); ++i) {
      enc.encode(x, train[i], row);
      design.row(static_cast<Eigen::Index>(i)) = row;
      target(static_cast<Eigen::Index>(i)) = y[train[i]];
    }
    const Eigen::VectorXd beta = design.completeOrthogonalDecomposition().solve(target);
    for (auto r : hold) {
      enc.encode(x, r, row);
      const double d = y[r] - row.dot(beta);
      sse += d * d;
    }
  }
  return sse;
}

}  // namespace geomatch
