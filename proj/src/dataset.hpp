#ifndef VCQR_DATASET_HPP_
#define VCQR_DATASET_HPP_

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace vcqr {

// Affine map between the index variable's native range [lo, hi] and the unit
// interval the spline bases live on.
struct TMap {
  double lo = 0.0;
  double hi = 1.0;

  double to_unit(double t) const { return (t - lo) / (hi - lo); }
  double from_unit(double u) const { return lo + u * (hi - lo); }
  double scale() const { return hi - lo; }
};

// Observations (t_i, x_i, y_i) with x column 0 identically one.  The t map is
// fixed at construction, either from the observed range or from a caller-
// supplied domain (simulations use their generative domain).
class Dataset {
 public:
  Dataset(std::vector<double> t, Eigen::MatrixXd x, Eigen::VectorXd y,
          std::vector<std::string> column_names = {});
  Dataset(std::vector<double> t, Eigen::MatrixXd x, Eigen::VectorXd y,
          TMap t_map, std::vector<std::string> column_names = {});

  std::size_t n() const { return t_.size(); }
  std::size_t p() const { return static_cast<std::size_t>(x_.cols()) - 1; }
  const std::vector<double>& t() const { return t_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  const TMap& t_map() const { return t_map_; }
  const std::vector<std::string>& column_names() const { return column_names_; }

  double t_unit(std::size_t i) const { return t_map_.to_unit(t_[i]); }

  // Observed-range sample quantile of t (for reporting ranges and default
  // knot placement).
  double t_quantile(double p) const;

 private:
  void validate() const;

  std::vector<double> t_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  TMap t_map_;
  std::vector<std::string> column_names_;
};

}  // namespace vcqr

#endif  // VCQR_DATASET_HPP_
