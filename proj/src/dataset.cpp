#include "dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "errors.hpp"
#include "stats.hpp"

namespace vcqr {

namespace {

TMap observed_range(const std::vector<double>& t) {
  auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  if (t.empty() || !(*lo < *hi)) {
    throw DataError("Dataset: index variable must take at least two values");
  }
  return {*lo, *hi};
}

}  // namespace

Dataset::Dataset(std::vector<double> t, Eigen::MatrixXd x, Eigen::VectorXd y,
                 std::vector<std::string> column_names)
    : t_(std::move(t)), x_(std::move(x)), y_(std::move(y)),
      t_map_(observed_range(t_)), column_names_(std::move(column_names)) {
  validate();
}

Dataset::Dataset(std::vector<double> t, Eigen::MatrixXd x, Eigen::VectorXd y,
                 TMap t_map, std::vector<std::string> column_names)
    : t_(std::move(t)), x_(std::move(x)), y_(std::move(y)), t_map_(t_map),
      column_names_(std::move(column_names)) {
  if (!(t_map_.lo < t_map_.hi)) {
    throw std::invalid_argument("Dataset: t map must satisfy lo < hi");
  }
  validate();
}

void Dataset::validate() const {
  const std::size_t n = t_.size();
  if (n == 0) throw DataError("Dataset: empty");
  if (static_cast<std::size_t>(x_.rows()) != n ||
      static_cast<std::size_t>(y_.size()) != n) {
    throw DataError("Dataset: inconsistent lengths");
  }
  if (x_.cols() < 1) throw DataError("Dataset: x needs an intercept column");
  if (!x_.allFinite() || !y_.allFinite()) {
    throw DataError("Dataset: non-finite entries");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(t_[i])) throw DataError("Dataset: non-finite t");
    if (x_(static_cast<Eigen::Index>(i), 0) != 1.0) {
      throw DataError("Dataset: x column 0 must be identically 1");
    }
    if (t_[i] < t_map_.lo || t_[i] > t_map_.hi) {
      throw DataError("Dataset: t outside the declared domain");
    }
  }
}

double Dataset::t_quantile(double p) const {
  return stats::sample_quantile(t_, p);
}

}  // namespace vcqr
