#ifndef VCQR_KNOTSEL_HPP_
#define VCQR_KNOTSEL_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <vector>

#include "vcm.hpp"

namespace vcqr {

// Guideline for the number of potential knots: min(4 n^{1/5}, n/4, N, 30)
// floored, at least 1, with N the number of distinct index values.
std::size_t default_potential_knot_count(std::size_t n, std::size_t distinct_t);

// Adapted Schwarz criterion log(objective) + 0.5 log(n) p_n / n; a perfect
// fit (objective 0) yields -infinity.
double sic(double objective, std::size_t p_n, std::size_t n);

struct KnotSelectionConfig {
  // Candidate knots per coefficient, in native t units.  When empty, a
  // shared candidate set of `potential_count` knots is placed automatically
  // (equispaced sample quantiles of t; exact equispacing on request), the
  // count itself defaulting to the guideline above.
  std::vector<std::vector<double>> potential_knots;
  std::size_t potential_count = 0;
  bool equispaced = false;
  int degree = 1;
  int max_iterations = 20;
  double add_level = 0.95;     // chi-square screen for additions
  double delete_level = 0.90;  // chi-square screen for deletions
};

struct KnotTraceEntry {
  std::vector<std::vector<double>> knots;  // per coefficient, native units
  std::size_t p_n = 0;
  double objective = 0.0;
  double sic = 0.0;
};

struct KnotSelectionTrace {
  std::vector<KnotTraceEntry> visited;
  std::size_t selected_index = 0;
};

struct ScoreResult {
  double statistic = 0.0;
  std::size_t df = 0;
  bool collinear = false;
};

// Rao score for augmenting a fitted model with candidate columns, computed
// from the current fit's residual scores without refitting.
ScoreResult rao_add_score(const VcqrModel& model,
                          const Eigen::MatrixXd& candidate_columns);

// Wald statistic for deleting a coefficient block, standardized by
// tau(1-tau) * sparsity^2 times the block Schur complement of the Gram
// matrix; sparsity is the Hall-Sheather-style difference quotient of
// residual sample quantiles with bandwidth n^{-1/3}.
ScoreResult wald_delete_score(const VcqrModel& model,
                              const std::vector<std::size_t>& block);

struct KnotSelectionResult {
  VcqrModel model;  // SIC-best configuration, refit in the B-spline basis
  KnotSelectionTrace trace;
};

// Stepwise search of Section-style add/delete moves over the potential knot
// set, one change per iteration, tracked by the adapted SIC.  The search
// itself runs in the truncated power basis.
KnotSelectionResult stepwise_select(std::shared_ptr<const Dataset> data,
                                    double tau,
                                    const KnotSelectionConfig& config);

// Expand the automatic candidate placement for a dataset (exposed for the
// CLI and tests).
std::vector<double> place_potential_knots(const Dataset& data,
                                          std::size_t count, bool equispaced);

}  // namespace vcqr

#endif  // VCQR_KNOTSEL_HPP_
