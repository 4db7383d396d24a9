#ifndef VCQR_VCM_HPP_
#define VCQR_VCM_HPP_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "basis.hpp"
#include "dataset.hpp"
#include "qrsolve.hpp"

namespace vcqr {

// Fitted varying-coefficient quantile model.  Bases live on the unit
// interval; coefficient-curve evaluation takes t in native units and applies
// the chain rule for derivatives.  Immutable after fitting.
class VcqrModel {
 public:
  VcqrModel(double tau, VcDesign design, QuantileFit fit, TMap t_map,
            std::shared_ptr<const Dataset> data);

  double tau() const { return tau_; }
  const VcDesign& design() const { return design_; }
  const QuantileFit& fit() const { return fit_; }
  const TMap& t_map() const { return t_map_; }
  const Dataset& data() const { return *data_; }

  // Coefficient block for covariate j.
  Eigen::VectorXd coefficient_block(std::size_t j) const;

  // beta_j^(deriv)(t); errors if t falls outside the model's t domain.
  double eval_coefficient(std::size_t j, double t, int deriv = 0) const;

  // Fitted conditional quantile sum_j beta_j(t) x_j.
  double predict(double t, const Eigen::VectorXd& x) const;

 private:
  double tau_;
  VcDesign design_;
  QuantileFit fit_;
  TMap t_map_;
  std::shared_ptr<const Dataset> data_;
};

// Fit Eq.-style check-loss minimization over the spline-expanded design.
// Residuals are recomputed through the model evaluation path, so
// predict(t_i, x_i) == y_i - residual_i holds exactly.
VcqrModel fit_vcqr(std::shared_ptr<const Dataset> data, double tau,
                   const VcDesign& design,
                   const std::optional<Eigen::VectorXd>& weights = std::nullopt);

// Build the n x width spline design matrix for a dataset.
Eigen::MatrixXd expand_design(const Dataset& data, const VcDesign& design);

using CoefficientFunction = std::function<double(double)>;

// Per-coefficient mean squared error of the fitted curves (and derivatives)
// against true coefficient functions over a grid of native-unit t values.
// Result (j, d) entry: mean over grid of (beta_hat_j^(d) - truth_j^(d))^2.
Eigen::MatrixXd mise(const VcqrModel& model,
                     const std::vector<std::vector<CoefficientFunction>>& truth,
                     const std::vector<double>& grid);

}  // namespace vcqr

#endif  // VCQR_VCM_HPP_
