#include "vcm.hpp"

#include <cmath>
#include <stdexcept>

#include "errors.hpp"

namespace vcqr {

VcqrModel::VcqrModel(double tau, VcDesign design, QuantileFit fit, TMap t_map,
                     std::shared_ptr<const Dataset> data)
    : tau_(tau), design_(std::move(design)), fit_(std::move(fit)),
      t_map_(t_map), data_(std::move(data)) {
  if (static_cast<std::size_t>(fit_.coefficients.size()) != design_.width()) {
    throw std::invalid_argument("VcqrModel: coefficient/design width mismatch");
  }
}

Eigen::VectorXd VcqrModel::coefficient_block(std::size_t j) const {
  return fit_.coefficients.segment(
      static_cast<Eigen::Index>(design_.block_offset(j)),
      static_cast<Eigen::Index>(design_.block_size(j)));
}

double VcqrModel::eval_coefficient(std::size_t j, double t, int deriv) const {
  if (j >= design_.num_coefficients()) {
    throw std::invalid_argument("eval_coefficient: coefficient index out of range");
  }
  if (deriv < 0) throw std::invalid_argument("eval_coefficient: negative deriv");
  const double span = t_map_.scale();
  const double slack = 1e-12 * span;
  if (t < t_map_.lo - slack || t > t_map_.hi + slack) {
    throw std::invalid_argument(
        "eval_coefficient: t outside the fitted range (no extrapolation)");
  }
  const double u = std::clamp(t_map_.to_unit(t), 0.0, 1.0);
  const Eigen::VectorXd values = design_.basis(j).evaluate(u, deriv);
  const double chain = std::pow(1.0 / span, deriv);
  return chain * coefficient_block(j).dot(values);
}

double VcqrModel::predict(double t, const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != design_.num_coefficients()) {
    throw std::invalid_argument("predict: covariate length mismatch");
  }
  if (x[0] != 1.0) throw std::invalid_argument("predict: x[0] must be 1");
  double acc = 0.0;
  for (std::size_t j = 0; j < design_.num_coefficients(); ++j) {
    acc += x[static_cast<Eigen::Index>(j)] * eval_coefficient(j, t, 0);
  }
  return acc;
}

Eigen::MatrixXd expand_design(const Dataset& data, const VcDesign& design) {
  const std::size_t n = data.n();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(design.width()));
  for (std::size_t i = 0; i < n; ++i) {
    X.row(static_cast<Eigen::Index>(i)) =
        design.design_row(data.t_unit(i),
                          data.x().row(static_cast<Eigen::Index>(i)).transpose())
            .transpose();
  }
  return X;
}

VcqrModel fit_vcqr(std::shared_ptr<const Dataset> data, double tau,
                   const VcDesign& design,
                   const std::optional<Eigen::VectorXd>& weights) {
  if (!data) throw std::invalid_argument("fit_vcqr: null dataset");
  if (design.num_coefficients() != data->p() + 1) {
    throw std::invalid_argument("fit_vcqr: design/covariate count mismatch");
  }
  if (design.width() >= data->n()) {
    throw std::invalid_argument("fit_vcqr: design wider than the sample");
  }
  const Eigen::MatrixXd X = expand_design(*data, design);
  QuantileFit fit = solve_quantile(X, data->y(), tau, weights);

  VcqrModel model(tau, design, std::move(fit), data->t_map(), data);

  // Rewrite residuals through the evaluation path so y_i - residual_i
  // reproduces predict(t_i, x_i) up to the one unavoidable rounding, then
  // refresh the stored objective from them.
  QuantileFit adjusted = model.fit();
  for (std::size_t i = 0; i < data->n(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    adjusted.residuals[ii] =
        data->y()[ii] -
        model.predict(data->t()[i], data->x().row(ii).transpose());
  }
  adjusted.objective = adjusted.recompute_objective(weights);
  return VcqrModel(tau, design, std::move(adjusted), data->t_map(), data);
}

Eigen::MatrixXd mise(const VcqrModel& model,
                     const std::vector<std::vector<CoefficientFunction>>& truth,
                     const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("mise: empty grid");
  const std::size_t ncoef = model.design().num_coefficients();
  if (truth.size() != ncoef) {
    throw std::invalid_argument("mise: truth/coefficient count mismatch");
  }
  std::size_t max_d = 0;
  for (const auto& derivs : truth) max_d = std::max(max_d, derivs.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(ncoef), static_cast<Eigen::Index>(max_d));
  for (std::size_t j = 0; j < ncoef; ++j) {
    for (std::size_t d = 0; d < truth[j].size(); ++d) {
      double acc = 0.0;
      for (double t : grid) {
        const double diff = model.eval_coefficient(j, t, static_cast<int>(d)) -
                            truth[j][d](t);
        acc += diff * diff;
      }
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(d)) =
          acc / static_cast<double>(grid.size());
    }
  }
  return out;
}

}  // namespace vcqr
