#ifndef VCQR_HYPTEST_HPP_
#define VCQR_HYPTEST_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "basis.hpp"
#include "dataset.hpp"
#include "qrsolve.hpp"
#include "vcm.hpp"

namespace vcqr {

// Change of coordinates Gamma(t, x) = A * Pi(t, x) = (x', Gamma_2(t, x)')'.
// Per coefficient block the constant direction moves into the x slot (for
// B-splines via the partition of unity, for truncated powers the constant is
// already the leading function) and the remaining functions form Gamma_2.
class GammaDesign {
 public:
  explicit GammaDesign(VcDesign design);

  const VcDesign& design() const { return design_; }
  std::size_t x_block_width() const { return design_.num_coefficients(); }
  std::size_t gamma2_width() const {
    return design_.width() - design_.num_coefficients();
  }

  // Full Gamma row: first the p+1 covariates, then the Gamma_2 block.
  Eigen::VectorXd gamma_row(double u, const Eigen::VectorXd& x) const;

  // Gamma_2 part only.
  Eigen::VectorXd gamma2_row(double u, const Eigen::VectorXd& x) const;

  // The explicit transformation matrix with Gamma = A * Pi (square,
  // invertible); mainly for verification.
  Eigen::MatrixXd transformation_matrix() const;

 private:
  VcDesign design_;
};

enum class Calibration { ChiSq, Normal };

struct RaoTestReport {
  double statistic = 0.0;       // |w|^2
  std::size_t df = 0;           // gamma2 width = p_k - (p + 1)
  double sigma2 = 0.0;          // tau * (1 - tau)
  double standardized = 0.0;    // (|w|^2 - df) / sqrt(2 df)
  double p_value_chisq = 1.0;
  double p_value_normal = 1.0;
  Calibration calibration_used = Calibration::ChiSq;
  double p_value = 1.0;         // under calibration_used
  bool weighted = false;
  QuantileFit null_fit;
  std::size_t n = 0;
  double tau = 0.5;
};

struct LrTestReport {
  double statistic = 0.0;
  std::size_t bootstrap_count = 0;
  std::vector<double> bootstrap_statistics;
  double p_value = 1.0;  // (1 + #{l* >= l}) / (B + 1)
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double tau = 0.5;
};

struct ScaleModel {
  Eigen::VectorXd gamma_hat;   // coefficients on (t, x')
  Eigen::VectorXd sigma_hat;   // per-observation scales, floored
  double scale_floor = 0.0;
  bool floor_applied = false;
};

// Rao-score-type test of coefficient constancy against the spline
// alternative spanned by `design`.  Fits only the null linear model; the
// statistic is s' Q^(22) s / (tau (1 - tau)) with s the Gamma_2 score sum at
// the null fit and Q^(22) the inverse Schur complement of the Gamma_2 block.
RaoTestReport rao_score_test(const Dataset& data, double tau,
                             const VcDesign& design,
                             std::optional<Calibration> calibration = {});

// Heteroscedastic variant: every design row and the response carry the
// 1/sigma_hat_i weight; the basis is still evaluated at the original t_i.
RaoTestReport rao_score_test_weighted(const Dataset& data, double tau,
                                      const VcDesign& design,
                                      const ScaleModel& scale,
                                      std::optional<Calibration> calibration = {});

// Likelihood-ratio-type statistic l = 2 (null objective - alternative
// objective), calibrated by the residual bootstrap: errors resampled from
// alternative-fit residuals recentered to tau-quantile zero, both models
// refit per replicate.
LrTestReport lr_test(const Dataset& data, double tau, const VcDesign& design,
                     std::size_t bootstrap_count, std::uint64_t seed);

// Linear scale family s(t, x) = (t, x') gamma, estimated from absolute
// residuals of median regression; scales are floored at scale_floor (or at
// 1e-3 * median absolute deviation of y when not supplied).
ScaleModel estimate_scale(const Dataset& data,
                          std::optional<double> scale_floor = {});

// Score statistic for augmenting a design D with candidate columns C given
// residual scores phi: s' (C'C - C'D (D'D)^-1 D'C)^-1 s / (tau (1 - tau))
// with s = C' phi.  Returns nullopt when the Schur complement is singular
// (collinear candidate).
std::optional<double> schur_score_statistic(const Eigen::MatrixXd& current,
                                            const Eigen::MatrixXd& candidate,
                                            const Eigen::VectorXd& phi,
                                            double tau);

}  // namespace vcqr

#endif  // VCQR_HYPTEST_HPP_
