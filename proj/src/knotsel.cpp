#include "knotsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "errors.hpp"
#include "hyptest.hpp"
#include "stats.hpp"

namespace vcqr {

std::size_t default_potential_knot_count(std::size_t n, std::size_t distinct_t) {
  if (n < 1 || distinct_t < 1) {
    throw std::invalid_argument("default_potential_knot_count: empty sample");
  }
  const double guideline =
      std::min({4.0 * std::pow(static_cast<double>(n), 0.2),
                static_cast<double>(n) / 4.0,
                static_cast<double>(distinct_t), 30.0});
  const double floored = std::floor(guideline);
  return static_cast<std::size_t>(std::max(floored, 1.0));
}

double sic(double objective, std::size_t p_n, std::size_t n) {
  if (objective < 0.0) throw std::invalid_argument("sic: negative objective");
  if (n < 1) throw std::invalid_argument("sic: empty sample");
  if (objective == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(objective) +
         0.5 * std::log(static_cast<double>(n)) * static_cast<double>(p_n) /
             static_cast<double>(n);
}

namespace {

Eigen::VectorXd residual_scores(const QuantileFit& fit) {
  Eigen::VectorXd phi(fit.residuals.size());
  for (Eigen::Index i = 0; i < fit.residuals.size(); ++i) {
    phi[i] = (std::abs(fit.residuals[i]) <= fit.zero_tol)
                 ? 0.0
                 : check_score(fit.tau, fit.residuals[i]);
  }
  return phi;
}

double sparsity_estimate(const QuantileFit& fit) {
  const std::size_t n = static_cast<std::size_t>(fit.residuals.size());
  std::vector<double> res(fit.residuals.data(), fit.residuals.data() + n);
  const double h = std::pow(static_cast<double>(n), -1.0 / 3.0);
  const double lo = std::max(1e-3, fit.tau - h);
  const double hi = std::min(1.0 - 1e-3, fit.tau + h);
  const double q_hi = stats::sample_quantile(res, hi);
  const double q_lo = stats::sample_quantile(res, lo);
  return std::max((q_hi - q_lo) / (hi - lo), 1e-12);
}

std::string serialize_knots(const std::vector<std::vector<double>>& knots) {
  std::ostringstream os;
  os.precision(17);
  for (const auto& per_coef : knots) {
    for (double k : per_coef) os << k << ',';
    os << ';';
  }
  return os.str();
}

}  // namespace

std::vector<double> place_potential_knots(const Dataset& data,
                                          std::size_t count, bool equispaced) {
  if (count == 0) return {};
  const double lo = data.t_map().lo;
  const double hi = data.t_map().hi;
  std::vector<double> knots;
  knots.reserve(count);
  for (std::size_t l = 1; l <= count; ++l) {
    const double frac = static_cast<double>(l) / static_cast<double>(count + 1);
    double k = equispaced ? lo + frac * (hi - lo) : data.t_quantile(frac);
    knots.push_back(k);
  }
  // Keep strictly increasing knots strictly inside the domain.
  std::vector<double> cleaned;
  for (double k : knots) {
    if (k <= lo || k >= hi) continue;
    if (!cleaned.empty() && !(k > cleaned.back())) continue;
    cleaned.push_back(k);
  }
  return cleaned;
}

ScoreResult rao_add_score(const VcqrModel& model,
                          const Eigen::MatrixXd& candidate_columns) {
  ScoreResult result;
  result.df = static_cast<std::size_t>(candidate_columns.cols());
  const Eigen::MatrixXd current = expand_design(model.data(), model.design());
  const Eigen::VectorXd phi = residual_scores(model.fit());
  const auto stat =
      schur_score_statistic(current, candidate_columns, phi, model.tau());
  if (!stat) {
    result.collinear = true;
    return result;
  }
  result.statistic = *stat;
  return result;
}

ScoreResult wald_delete_score(const VcqrModel& model,
                              const std::vector<std::size_t>& block) {
  ScoreResult result;
  result.df = block.size();
  if (block.empty()) throw std::invalid_argument("wald_delete_score: empty block");
  const std::size_t width = model.design().width();
  for (std::size_t idx : block) {
    if (idx >= width) {
      throw std::invalid_argument("wald_delete_score: block index out of range");
    }
  }
  const Eigen::MatrixXd design_matrix =
      expand_design(model.data(), model.design());
  const Eigen::Index nb = static_cast<Eigen::Index>(block.size());
  Eigen::MatrixXd block_cols(design_matrix.rows(), nb);
  Eigen::VectorXd theta_block(nb);
  std::vector<bool> in_block(width, false);
  for (Eigen::Index j = 0; j < nb; ++j) {
    block_cols.col(j) = design_matrix.col(static_cast<Eigen::Index>(block[j]));
    theta_block[j] = model.fit().coefficients[static_cast<Eigen::Index>(block[j])];
    in_block[block[j]] = true;
  }
  Eigen::MatrixXd rest_cols(design_matrix.rows(),
                            static_cast<Eigen::Index>(width - block.size()));
  Eigen::Index at = 0;
  for (std::size_t cidx = 0; cidx < width; ++cidx) {
    if (!in_block[cidx]) {
      rest_cols.col(at++) = design_matrix.col(static_cast<Eigen::Index>(cidx));
    }
  }

  if (theta_block.isZero(0.0)) return result;  // statistic 0 by definition

  const Eigen::MatrixXd g_bb = block_cols.transpose() * block_cols;
  const Eigen::MatrixXd g_br = block_cols.transpose() * rest_cols;
  const Eigen::MatrixXd g_rr = rest_cols.transpose() * rest_cols;
  Eigen::LDLT<Eigen::MatrixXd> rr_ldlt(g_rr);
  const Eigen::VectorXd d = rr_ldlt.vectorD();
  if (rr_ldlt.info() != Eigen::Success ||
      d.minCoeff() <= 1e-12 * std::max(d.cwiseAbs().maxCoeff(), 1e-300)) {
    result.collinear = true;
    return result;
  }
  const Eigen::MatrixXd schur = g_bb - g_br * rr_ldlt.solve(g_br.transpose());

  const double sparsity = sparsity_estimate(model.fit());
  const double s2 = model.tau() * (1.0 - model.tau()) * sparsity * sparsity;
  const double quad = theta_block.dot(schur * theta_block);
  if (!(quad >= 0.0) || s2 <= 0.0) {
    result.collinear = true;
    return result;
  }
  result.statistic = quad / s2;
  return result;
}

namespace {

struct StepwiseState {
  std::vector<std::vector<double>> knots;  // native units, per coefficient
};

VcqrModel fit_state(const std::shared_ptr<const Dataset>& data, double tau,
                    const StepwiseState& state, int degree, BasisKind kind) {
  const TMap& map = data->t_map();
  std::vector<SplineBasis> bases;
  bases.reserve(state.knots.size());
  for (const auto& native : state.knots) {
    std::vector<double> unit;
    unit.reserve(native.size());
    for (double k : native) unit.push_back(map.to_unit(k));
    bases.push_back(make_basis(unit, degree, kind));
  }
  return fit_vcqr(data, tau, VcDesign(std::move(bases)));
}

}  // namespace

KnotSelectionResult stepwise_select(std::shared_ptr<const Dataset> data,
                                    double tau,
                                    const KnotSelectionConfig& config) {
  if (!data) throw std::invalid_argument("stepwise_select: null dataset");
  if (!(config.add_level > 0.0 && config.add_level < 1.0) ||
      !(config.delete_level > 0.0 && config.delete_level < 1.0)) {
    throw std::invalid_argument("stepwise_select: thresholds outside (0,1)");
  }
  if (config.degree < 0) {
    throw std::invalid_argument("stepwise_select: negative degree");
  }
  const std::size_t n = data->n();
  const std::size_t ncoef = data->p() + 1;
  const TMap& map = data->t_map();

  // Resolve per-coefficient candidate sets.
  std::vector<std::vector<double>> candidates;
  if (!config.potential_knots.empty()) {
    if (config.potential_knots.size() != ncoef) {
      throw std::invalid_argument(
          "stepwise_select: potential knots must cover every coefficient");
    }
    candidates = config.potential_knots;
    for (auto& per_coef : candidates) {
      std::sort(per_coef.begin(), per_coef.end());
      for (std::size_t i = 0; i < per_coef.size(); ++i) {
        if (per_coef[i] <= map.lo || per_coef[i] >= map.hi) {
          throw std::invalid_argument(
              "stepwise_select: candidate knot outside the observed t range");
        }
        if (i > 0 && per_coef[i] == per_coef[i - 1]) {
          throw std::invalid_argument("stepwise_select: duplicate candidate knot");
        }
      }
    }
  } else {
    std::size_t count = config.potential_count;
    if (count == 0) {
      std::vector<double> ts = data->t();
      std::sort(ts.begin(), ts.end());
      const std::size_t distinct = static_cast<std::size_t>(
          std::unique(ts.begin(), ts.end()) - ts.begin());
      count = default_potential_knot_count(n, distinct);
    }
    const std::vector<double> shared =
        place_potential_knots(*data, count, config.equispaced);
    candidates.assign(ncoef, shared);
  }

  const double add_cut = stats::chi_squared_quantile(config.add_level, 1.0);
  const double delete_cut = stats::chi_squared_quantile(config.delete_level, 1.0);

  StepwiseState state;
  state.knots.assign(ncoef, {});

  KnotSelectionTrace trace;
  std::set<std::string> visited;
  auto record = [&](const VcqrModel& model) {
    KnotTraceEntry entry;
    entry.knots = state.knots;
    entry.p_n = model.design().width();
    entry.objective = model.fit().objective;
    entry.sic = sic(entry.objective, entry.p_n, n);
    trace.visited.push_back(std::move(entry));
    visited.insert(serialize_knots(state.knots));
  };

  VcqrModel current =
      fit_state(data, tau, state, config.degree, BasisKind::TruncatedPower);
  record(current);

  bool cycle = false;
  for (int iter = 0; iter < config.max_iterations && !cycle; ++iter) {
    const std::vector<std::vector<double>> iter_start = state.knots;
    bool changed = false;

    // Addition phase: best-scoring (coefficient, knot) pair not in the model.
    {
      const Eigen::MatrixXd design_matrix =
          expand_design(*data, current.design());
      const Eigen::VectorXd phi = residual_scores(current.fit());
      double best_stat = -1.0;
      std::size_t best_j = 0;
      double best_knot = 0.0;
      for (std::size_t j = 0; j < ncoef; ++j) {
        for (double knot : candidates[j]) {
          if (std::binary_search(state.knots[j].begin(), state.knots[j].end(),
                                 knot)) {
            continue;
          }
          const double uk = map.to_unit(knot);
          Eigen::VectorXd col(static_cast<Eigen::Index>(n));
          for (std::size_t i = 0; i < n; ++i) {
            const double u = data->t_unit(i) - uk;
            col[static_cast<Eigen::Index>(i)] =
                u >= 0.0
                    ? data->x()(static_cast<Eigen::Index>(i),
                                static_cast<Eigen::Index>(j)) *
                          std::pow(u, config.degree)
                    : 0.0;
          }
          const auto stat =
              schur_score_statistic(design_matrix, col, phi, tau);
          if (stat && *stat > best_stat) {
            best_stat = *stat;
            best_j = j;
            best_knot = knot;
          }
        }
      }
      if (best_stat > add_cut) {
        auto& per_coef = state.knots[best_j];
        per_coef.insert(
            std::upper_bound(per_coef.begin(), per_coef.end(), best_knot),
            best_knot);
        const bool seen = visited.count(serialize_knots(state.knots)) > 0;
        current = fit_state(data, tau, state, config.degree,
                            BasisKind::TruncatedPower);
        if (seen) {
          cycle = true;
        } else {
          record(current);
        }
        changed = true;
      }
    }

    // Deletion phase: weakest current knot below the screen.
    if (!cycle) {
      double worst_stat = std::numeric_limits<double>::infinity();
      std::size_t worst_j = 0;
      double worst_knot = 0.0;
      bool have = false;
      for (std::size_t j = 0; j < ncoef; ++j) {
        for (std::size_t r = 0; r < state.knots[j].size(); ++r) {
          const std::size_t col = current.design().block_offset(j) +
                                  static_cast<std::size_t>(config.degree) + 1 +
                                  r;
          const ScoreResult score = wald_delete_score(current, {col});
          if (score.collinear) continue;
          if (score.statistic < worst_stat) {
            worst_stat = score.statistic;
            worst_j = j;
            worst_knot = state.knots[j][r];
            have = true;
          }
        }
      }
      if (have && worst_stat < delete_cut) {
        auto& per_coef = state.knots[worst_j];
        per_coef.erase(
            std::find(per_coef.begin(), per_coef.end(), worst_knot));
        const bool seen = visited.count(serialize_knots(state.knots)) > 0;
        current = fit_state(data, tau, state, config.degree,
                            BasisKind::TruncatedPower);
        if (seen) {
          cycle = true;
        } else {
          record(current);
        }
        changed = true;
      }
    }

    if (!changed) break;
    if (state.knots == iter_start) break;  // add/delete cancelled out
  }

  // SIC winner among visited models; first minimum wins ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < trace.visited.size(); ++i) {
    if (trace.visited[i].sic < trace.visited[best].sic) best = i;
  }
  trace.selected_index = best;

  StepwiseState selected;
  selected.knots = trace.visited[best].knots;
  VcqrModel final_model =
      fit_state(data, tau, selected, config.degree, BasisKind::BSpline);
  return {std::move(final_model), std::move(trace)};
}

}  // namespace vcqr
