#ifndef VCQR_QRSOLVE_HPP_
#define VCQR_QRSOLVE_HPP_

#include <Eigen/Dense>
#include <optional>

namespace vcqr {

// Check (pinball) loss rho_tau(s) = s * (tau - 1{s < 0}).
double check_loss(double tau, double s);

// Its derivative away from 0: tau for s > 0, tau - 1 for s < 0, 0 at s = 0.
double check_score(double tau, double s);

// Result of one check-loss minimization.  residuals are y - design * coef;
// entries with |r| <= zero_tol count as zero residuals, and for those the
// dual certificate carries the basic dual value in [tau - 1, tau] instead of
// check_score(r).
struct QuantileFit {
  double tau = 0.5;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;
  double objective = 0.0;
  int zero_residual_count = 0;
  Eigen::VectorXd dual_certificate;
  double zero_tol = 0.0;
  bool rank_deficient = false;
  int iterations = 0;

  // Recompute sum_i w_i rho_tau(residual_i) from the stored residuals.
  double recompute_objective(const std::optional<Eigen::VectorXd>& weights =
                                 std::nullopt) const;
};

struct SolveOptions {
  double gap_tol = 1e-8;       // duality gap tolerance (relative)
  int max_iterations = 200;    // interior-point iteration cap
  int max_pivots = 2000;       // purification pivot cap
  bool purify = true;          // finish at a vertex
};

// Global minimizer of sum_i w_i rho_tau(y_i - design.row(i) * theta).
// Interior-point solve followed by purification to a vertex, so the
// stationarity certificate |design^T (w .* dual)|_inf ~ 0 holds and at least
// rank(design) residuals vanish.  Rank-deficient designs are solved on an
// independent column subset with zeros re-embedded and the flag set.
QuantileFit solve_quantile(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& y, double tau,
    const std::optional<Eigen::VectorXd>& weights = std::nullopt,
    const SolveOptions& options = SolveOptions());

}  // namespace vcqr

#endif  // VCQR_QRSOLVE_HPP_
