#include "hyptest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "errors.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace vcqr {

namespace {

// LDLT with an explicit relative singularity check.
class CheckedLdlt {
 public:
  explicit CheckedLdlt(const Eigen::MatrixXd& m) : ldlt_(m) {
    if (ldlt_.info() != Eigen::Success) {
      singular_ = true;
      return;
    }
    const Eigen::VectorXd d = ldlt_.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    singular_ = (d.minCoeff() <= 1e-12 * std::max(dmax, 1e-300));
  }

  bool singular() const { return singular_; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return ldlt_.solve(b); }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return ldlt_.solve(b); }

 private:
  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool singular_ = false;
};

Eigen::VectorXd score_vector(const QuantileFit& fit) {
  Eigen::VectorXd phi(fit.residuals.size());
  for (Eigen::Index i = 0; i < fit.residuals.size(); ++i) {
    phi[i] = (std::abs(fit.residuals[i]) <= fit.zero_tol)
                 ? 0.0
                 : check_score(fit.tau, fit.residuals[i]);
  }
  return phi;
}

RaoTestReport rao_core(const Dataset& data, double tau, const VcDesign& design,
                       const std::optional<Eigen::VectorXd>& multipliers,
                       std::optional<Calibration> calibration, bool weighted) {
  const std::size_t n = data.n();
  const std::size_t p1 = data.p() + 1;
  const std::size_t width = design.width();
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("rao_score_test: tau outside (0,1)");
  }
  if (design.num_coefficients() != p1) {
    throw std::invalid_argument("rao_score_test: design/covariate mismatch");
  }
  if (n <= width) {
    throw std::invalid_argument("rao_score_test: sample smaller than the design");
  }

  GammaDesign gamma(design);
  const std::size_t g2w = gamma.gamma2_width();

  Eigen::MatrixXd Xl(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p1));
  Eigen::VectorXd yl = data.y();
  Eigen::MatrixXd G2(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(g2w));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    const double m = multipliers ? (*multipliers)[ii] : 1.0;
    Xl.row(ii) = m * data.x().row(ii);
    yl[ii] *= m;
    G2.row(ii) =
        m * gamma.gamma2_row(data.t_unit(i), data.x().row(ii).transpose())
                .transpose();
  }

  QuantileFit null_fit = solve_quantile(Xl, yl, tau);
  const Eigen::VectorXd phi = score_vector(null_fit);

  const Eigen::VectorXd s = G2.transpose() * phi;
  const Eigen::MatrixXd q11 = Xl.transpose() * Xl;
  const Eigen::MatrixXd q12 = Xl.transpose() * G2;
  const Eigen::MatrixXd q22 = G2.transpose() * G2;

  CheckedLdlt q11_ldlt(q11);
  if (q11_ldlt.singular()) {
    throw NumericError("rao_score_test: singular covariate block");
  }
  const Eigen::MatrixXd schur = q22 - q12.transpose() * q11_ldlt.solve(q12);
  CheckedLdlt schur_ldlt(schur);
  if (schur_ldlt.singular()) {
    throw NumericError("rao_score_test: singular Schur complement (collinear design)");
  }

  RaoTestReport report;
  report.tau = tau;
  report.n = n;
  report.df = g2w;
  report.sigma2 = tau * (1.0 - tau);
  report.weighted = weighted;
  report.statistic = std::max(0.0, s.dot(schur_ldlt.solve(s)) / report.sigma2);
  const double dfd = static_cast<double>(report.df);
  report.standardized = (report.statistic - dfd) / std::sqrt(2.0 * dfd);
  report.p_value_chisq = 1.0 - stats::chi_squared_cdf(report.statistic, dfd);
  report.p_value_normal = 1.0 - stats::normal_cdf(report.standardized);
  const Calibration used = calibration.value_or(
      report.df <= 40 ? Calibration::ChiSq : Calibration::Normal);
  report.calibration_used = used;
  report.p_value =
      (used == Calibration::ChiSq) ? report.p_value_chisq : report.p_value_normal;
  report.null_fit = std::move(null_fit);
  return report;
}

}  // namespace

GammaDesign::GammaDesign(VcDesign design) : design_(std::move(design)) {
  for (std::size_t j = 0; j < design_.num_coefficients(); ++j) {
    if (design_.basis(j).dimension() < 1) {
      throw std::invalid_argument("GammaDesign: empty basis block");
    }
  }
}

Eigen::VectorXd GammaDesign::gamma_row(double u, const Eigen::VectorXd& x) const {
  Eigen::VectorXd row(static_cast<Eigen::Index>(design_.width()));
  row.head(static_cast<Eigen::Index>(x_block_width())) = x;
  row.tail(static_cast<Eigen::Index>(gamma2_width())) = gamma2_row(u, x);
  return row;
}

Eigen::VectorXd GammaDesign::gamma2_row(double u, const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != design_.num_coefficients()) {
    throw std::invalid_argument("gamma2_row: covariate length mismatch");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(gamma2_width()));
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < design_.num_coefficients(); ++j) {
    const Eigen::VectorXd values = design_.basis(j).evaluate(u, 0);
    const Eigen::Index d = values.size();
    out.segment(at, d - 1) = x[static_cast<Eigen::Index>(j)] * values.tail(d - 1);
    at += d - 1;
  }
  return out;
}

Eigen::MatrixXd GammaDesign::transformation_matrix() const {
  const Eigen::Index width = static_cast<Eigen::Index>(design_.width());
  const Eigen::Index nx = static_cast<Eigen::Index>(x_block_width());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(width, width);
  Eigen::Index gamma_at = nx;
  for (std::size_t j = 0; j < design_.num_coefficients(); ++j) {
    const Eigen::Index off = static_cast<Eigen::Index>(design_.block_offset(j));
    const Eigen::Index dim = static_cast<Eigen::Index>(design_.block_size(j));
    if (design_.basis(j).kind() == BasisKind::BSpline) {
      // Partition of unity: the constant direction is the sum of the block.
      a.row(static_cast<Eigen::Index>(j)).segment(off, dim).setOnes();
    } else {
      a(static_cast<Eigen::Index>(j), off) = 1.0;
    }
    for (Eigen::Index l = 1; l < dim; ++l) {
      a(gamma_at++, off + l) = 1.0;
    }
  }
  return a;
}

RaoTestReport rao_score_test(const Dataset& data, double tau,
                             const VcDesign& design,
                             std::optional<Calibration> calibration) {
  return rao_core(data, tau, design, std::nullopt, calibration, false);
}

RaoTestReport rao_score_test_weighted(const Dataset& data, double tau,
                                      const VcDesign& design,
                                      const ScaleModel& scale,
                                      std::optional<Calibration> calibration) {
  if (static_cast<std::size_t>(scale.sigma_hat.size()) != data.n()) {
    throw std::invalid_argument("rao_score_test_weighted: scale length mismatch");
  }
  if (scale.sigma_hat.minCoeff() <= 0.0) {
    throw std::invalid_argument("rao_score_test_weighted: nonpositive scale");
  }
  const Eigen::VectorXd multipliers = scale.sigma_hat.cwiseInverse();
  return rao_core(data, tau, design, multipliers, calibration, true);
}

LrTestReport lr_test(const Dataset& data, double tau, const VcDesign& design,
                     std::size_t bootstrap_count, std::uint64_t seed) {
  if (bootstrap_count < 1) {
    throw std::invalid_argument("lr_test: bootstrap count must be >= 1");
  }
  const std::size_t n = data.n();
  const Eigen::MatrixXd Xl = data.x();
  const Eigen::MatrixXd Xa = [&] {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n),
                        static_cast<Eigen::Index>(design.width()));
    for (std::size_t i = 0; i < n; ++i) {
      out.row(static_cast<Eigen::Index>(i)) =
          design.design_row(data.t_unit(i),
                            data.x().row(static_cast<Eigen::Index>(i)).transpose())
              .transpose();
    }
    return out;
  }();
  if (n <= design.width()) {
    throw std::invalid_argument("lr_test: sample smaller than the design");
  }

  const QuantileFit null_fit = solve_quantile(Xl, data.y(), tau);
  const QuantileFit alt_fit = solve_quantile(Xa, data.y(), tau);

  LrTestReport report;
  report.tau = tau;
  report.n = n;
  report.seed = seed;
  report.bootstrap_count = bootstrap_count;
  report.statistic = 2.0 * (null_fit.objective - alt_fit.objective);

  // Residual bootstrap: errors drawn from alternative-fit residuals
  // recentered so their empirical tau-quantile is zero, laid on the null fit.
  std::vector<double> centered(n);
  {
    std::vector<double> res(alt_fit.residuals.data(),
                            alt_fit.residuals.data() + n);
    const double qtau = stats::order_statistic_quantile(res, tau);
    for (std::size_t i = 0; i < n; ++i) centered[i] = res[i] - qtau;
  }
  const Eigen::VectorXd fitted_null = data.y() - null_fit.residuals;

  report.bootstrap_statistics.resize(bootstrap_count);
  std::size_t count_ge = 0;
  for (std::size_t b = 0; b < bootstrap_count; ++b) {
    RngStream rng(seed, b + 1);
    Eigen::VectorXd yb(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      yb[static_cast<Eigen::Index>(i)] =
          fitted_null[static_cast<Eigen::Index>(i)] +
          centered[rng.uniform_index(n)];
    }
    const QuantileFit b_null = solve_quantile(Xl, yb, tau);
    const QuantileFit b_alt = solve_quantile(Xa, yb, tau);
    const double lb = 2.0 * (b_null.objective - b_alt.objective);
    report.bootstrap_statistics[b] = lb;
    if (lb >= report.statistic) ++count_ge;
  }
  report.p_value = static_cast<double>(1 + count_ge) /
                   static_cast<double>(bootstrap_count + 1);
  return report;
}

ScaleModel estimate_scale(const Dataset& data, std::optional<double> scale_floor) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  if (n <= p + 2) {
    throw std::invalid_argument("estimate_scale: sample too small");
  }

  const QuantileFit median_fit = solve_quantile(data.x(), data.y(), 0.5);
  const Eigen::VectorXd abs_res = median_fit.residuals.cwiseAbs();

  Eigen::MatrixXd z(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(p + 2));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    z(ii, 0) = data.t()[i];
    z.row(ii).tail(static_cast<Eigen::Index>(p + 1)) = data.x().row(ii);
  }
  const QuantileFit scale_fit = solve_quantile(z, abs_res, 0.5);

  ScaleModel model;
  model.gamma_hat = scale_fit.coefficients;
  double floor = 0.0;
  if (scale_floor) {
    if (*scale_floor <= 0.0) {
      throw std::invalid_argument("estimate_scale: scale floor must be positive");
    }
    floor = *scale_floor;
  } else {
    std::vector<double> y(data.y().data(), data.y().data() + n);
    const double med = stats::sample_quantile(y, 0.5);
    std::vector<double> dev(n);
    for (std::size_t i = 0; i < n; ++i) dev[i] = std::abs(y[i] - med);
    floor = 1e-3 * stats::sample_quantile(dev, 0.5);
    if (floor <= 0.0) floor = 1e-12;
  }
  model.scale_floor = floor;
  model.sigma_hat = z * model.gamma_hat;
  for (Eigen::Index i = 0; i < model.sigma_hat.size(); ++i) {
    if (model.sigma_hat[i] < floor) {
      model.sigma_hat[i] = floor;
      model.floor_applied = true;
    }
  }
  return model;
}

std::optional<double> schur_score_statistic(const Eigen::MatrixXd& current,
                                            const Eigen::MatrixXd& candidate,
                                            const Eigen::VectorXd& phi,
                                            double tau) {
  if (current.rows() != candidate.rows() || current.rows() != phi.size()) {
    throw std::invalid_argument("schur_score_statistic: row mismatch");
  }
  const Eigen::VectorXd s = candidate.transpose() * phi;
  const Eigen::MatrixXd q11 = current.transpose() * current;
  const Eigen::MatrixXd q12 = current.transpose() * candidate;
  const Eigen::MatrixXd q22 = candidate.transpose() * candidate;
  CheckedLdlt q11_ldlt(q11);
  if (q11_ldlt.singular()) return std::nullopt;
  const Eigen::MatrixXd schur = q22 - q12.transpose() * q11_ldlt.solve(q12);
  CheckedLdlt schur_ldlt(schur);
  if (schur_ldlt.singular()) return std::nullopt;
  return std::max(0.0, s.dot(schur_ldlt.solve(s)) / (tau * (1.0 - tau)));
}

}  // namespace vcqr
