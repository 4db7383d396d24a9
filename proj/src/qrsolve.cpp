#include "qrsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "errors.hpp"

namespace vcqr {

double check_loss(double tau, double s) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("check_loss: tau outside (0,1)");
  }
  return s * (tau - (s < 0.0 ? 1.0 : 0.0));
}

double check_score(double tau, double s) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("check_score: tau outside (0,1)");
  }
  if (s > 0.0) return tau;
  if (s < 0.0) return tau - 1.0;
  return 0.0;
}

double QuantileFit::recompute_objective(
    const std::optional<Eigen::VectorXd>& weights) const {
  double obj = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double w = weights ? (*weights)[i] : 1.0;
    obj += w * check_loss(tau, residuals[i]);
  }
  return obj;
}

namespace {

struct InteriorPointResult {
  Eigen::VectorXd theta;
  int iterations = 0;
};

// Primal-dual interior point with Mehrotra corrector on
//   min tau * 1'u + (1-tau) * 1'v   s.t.  X theta + u - v = y,  u, v >= 0.
// The dual vector d satisfies X'd = 0 with d in [tau-1, tau]; slacks are
// zu = tau - d and zv = (1 - tau) + d.  Each iteration solves the q x q
// normal equations X' W^-1 X with W = u/zu + v/zv.
InteriorPointResult interior_point(const Eigen::MatrixXd& X,
                                   const Eigen::VectorXd& y, double tau,
                                   const Eigen::VectorXd& theta0,
                                   const SolveOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();

  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd r = y - X * theta;
  const double s0 = 1.0 + 0.1 * r.cwiseAbs().mean();
  Eigen::VectorXd u = r.cwiseMax(0.0).array() + s0;
  Eigen::VectorXd v = (-r).cwiseMax(0.0).array() + s0;
  Eigen::VectorXd d = Eigen::VectorXd::Constant(n, tau - 0.5);

  const double y_scale = 1.0 + y.cwiseAbs().maxCoeff();
  const double x_scale = 1.0 + X.cwiseAbs().maxCoeff();
  const double eta = 0.9995;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    Eigen::VectorXd zu = (tau - d.array()).matrix();
    Eigen::VectorXd zv = ((1.0 - tau) + d.array()).matrix();

    const Eigen::VectorXd rp = y - X * theta - u + v;
    const Eigen::VectorXd rd = -(X.transpose() * d);
    const double gap = u.dot(zu) + v.dot(zv);
    const double primal_obj = tau * u.sum() + (1.0 - tau) * v.sum();

    if (gap <= options.gap_tol * (1.0 + std::abs(primal_obj)) &&
        rp.cwiseAbs().maxCoeff() <= 1e-10 * y_scale &&
        rd.cwiseAbs().maxCoeff() <= 1e-9 * x_scale * y_scale) {
      break;
    }

    const Eigen::ArrayXd w_inv =
        1.0 / (u.array() / zu.array() + v.array() / zv.array());
    Eigen::MatrixXd Xw = X;
    Xw.array().colwise() *= w_inv.sqrt();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q, q);
    M.selfadjointView<Eigen::Lower>().rankUpdate(Xw.adjoint());
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success) {
      throw NumericError("solve_quantile: normal equations factorization failed");
    }

    auto solve_direction = [&](const Eigen::VectorXd& cu,
                               const Eigen::VectorXd& cv,
                               Eigen::VectorXd& dtheta, Eigen::VectorXd& dd,
                               Eigen::VectorXd& du, Eigen::VectorXd& dv) {
      const Eigen::VectorXd common =
          rp - (cu.array() / zu.array()).matrix() +
          (cv.array() / zv.array()).matrix();
      const Eigen::VectorXd rhs =
          X.transpose() * (w_inv * common.array()).matrix() - rd;
      dtheta = ldlt.solve(rhs);
      dd = (w_inv * (common - X * dtheta).array()).matrix();
      du = ((cu.array() + u.array() * dd.array()) / zu.array()).matrix();
      dv = ((cv.array() - v.array() * dd.array()) / zv.array()).matrix();
    };

    auto step_length = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& dz) {
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        if (dz[i] < 0.0) alpha = std::min(alpha, -z[i] / dz[i]);
      }
      return alpha;
    };

    // Affine (predictor) direction.
    Eigen::VectorXd cu = -(u.array() * zu.array()).matrix();
    Eigen::VectorXd cv = -(v.array() * zv.array()).matrix();
    Eigen::VectorXd dtheta, dd, du, dv;
    solve_direction(cu, cv, dtheta, dd, du, dv);

    const double ap_aff =
        std::min({1.0, eta * step_length(u, du), eta * step_length(v, dv)});
    const double ad_aff = std::min({1.0, eta * step_length(zu, -dd),
                                    eta * step_length(zv, dd)});
    const double gap_aff =
        (u + ap_aff * du).dot(zu - ad_aff * dd) +
        (v + ap_aff * dv).dot(zv + ad_aff * dd);
    double sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3);
    sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);
    const double mu = sigma * gap / (2.0 * static_cast<double>(n));

    // Corrector, reusing the factorization.
    cu = (mu - (u.array() * zu.array()) - du.array() * (-dd.array())).matrix();
    cv = (mu - (v.array() * zv.array()) - dv.array() * dd.array()).matrix();
    solve_direction(cu, cv, dtheta, dd, du, dv);

    const double ap =
        std::min({1.0, eta * step_length(u, du), eta * step_length(v, dv)});
    const double ad = std::min({1.0, eta * step_length(zu, -dd),
                                eta * step_length(zv, dd)});

    theta += ap * dtheta;
    u += ap * du;
    v += ap * dv;
    d += ad * dd;
  }
  return {theta, iter};
}

// Simplex-style descent to a vertex.  A vertex is an exact fit on a basis B
// of rank(X) rows; optimality holds when the scores of the non-zero-residual
// rows can be balanced by dual values in [tau-1, tau] on the zero-residual
// rows.  The certificate covers every observation: phi_tau(r_i) off the zero
// set, the balancing dual values on it.
struct Vertex {
  Eigen::VectorXd theta;
  std::vector<Eigen::Index> basis;
  Eigen::VectorXd certificate;  // length n
};

std::vector<Eigen::Index> initial_basis(const Eigen::MatrixXd& X,
                                        const Eigen::VectorXd& r) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(r[a]) < std::abs(r[b]);
  });

  // Greedy Gram-Schmidt over candidate rows, smallest residuals first.
  std::vector<Eigen::Index> basis;
  Eigen::MatrixXd ortho(q, q);
  Eigen::Index chosen = 0;
  for (Eigen::Index pos = 0; pos < n && chosen < q; ++pos) {
    Eigen::VectorXd w = X.row(order[pos]).transpose();
    const double norm0 = w.norm();
    if (norm0 == 0.0) continue;
    for (Eigen::Index j = 0; j < chosen; ++j) {
      w -= ortho.col(j).dot(w) * ortho.col(j);
    }
    // Re-orthogonalize once for stability.
    for (Eigen::Index j = 0; j < chosen; ++j) {
      w -= ortho.col(j).dot(w) * ortho.col(j);
    }
    if (w.norm() > 1e-10 * norm0) {
      ortho.col(chosen++) = w / w.norm();
      basis.push_back(order[pos]);
    }
  }
  if (chosen < q) {
    throw NumericError("solve_quantile: could not assemble a nonsingular basis");
  }
  std::sort(basis.begin(), basis.end());
  return basis;
}

// Balance the scores of the non-zero rows with dual values on the zero-set
// rows: find g in [tau-1, tau]^m minimizing |sum_i g_i x_i - v| by projected
// gradient (FISTA) on the box.  Feasibility of the balance system is exactly
// the optimality condition at a degenerate vertex.
struct CertificateCompletion {
  Eigen::VectorXd g;
  double residual_norm = 0.0;
};

// Bounded-variable least squares (Lawson-Hanson style active set): free one
// bound variable at a time by its gradient, solve the free subsystem by a
// minimum-norm least squares, and clip back onto the box along the segment.
// Dimensions here are small (q equations, m = |zero set| variables).
CertificateCompletion complete_certificate(const Eigen::MatrixXd& zero_rows,
                                           const Eigen::VectorXd& v,
                                           double tau) {
  const Eigen::Index m = zero_rows.rows();
  const Eigen::Index q = zero_rows.cols();
  const double lo = tau - 1.0;
  const double hi = tau;
  const double feas_tol = 1e-12 * (1.0 + v.cwiseAbs().maxCoeff());

  enum class State { Lower, Free, Upper };
  std::vector<State> state(m, State::Lower);
  Eigen::VectorXd g = Eigen::VectorXd::Constant(m, lo);

  // Warm start at the clipped least-norm solution.
  {
    Eigen::MatrixXd outer = zero_rows.transpose() * zero_rows;
    outer.diagonal().array() += 1e-12 * (1.0 + outer.trace());
    const Eigen::VectorXd ls = zero_rows * outer.ldlt().solve(v);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (ls[i] <= lo) {
        g[i] = lo;
        state[i] = State::Lower;
      } else if (ls[i] >= hi) {
        g[i] = hi;
        state[i] = State::Upper;
      } else {
        g[i] = ls[i];
        state[i] = State::Free;
      }
    }
  }

  auto residual = [&]() { return (zero_rows.transpose() * g - v).eval(); };

  const int max_outer = 40 + 8 * static_cast<int>(m);
  for (int outer_it = 0; outer_it < max_outer; ++outer_it) {
    Eigen::VectorXd res = residual();
    if (res.norm() <= feas_tol) break;

    // Gradient of 1/2 |A g - v|^2 is rows * res; a bound variable whose
    // gradient points into the box can improve the fit.
    const Eigen::VectorXd grad = zero_rows * res;
    Eigen::Index candidate = -1;
    double best = 1e-12 * (1.0 + grad.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < m; ++i) {
      if (state[i] == State::Lower && -grad[i] > best) {
        best = -grad[i];
        candidate = i;
      } else if (state[i] == State::Upper && grad[i] > best) {
        best = grad[i];
        candidate = i;
      }
    }

    bool have_free = false;
    for (Eigen::Index i = 0; i < m; ++i) have_free |= state[i] == State::Free;
    if (candidate >= 0) state[candidate] = State::Free;
    else if (!have_free) break;  // KKT point (possibly infeasible system)

    // Inner loop: solve on the free set, clip along the segment, fixing one
    // blocking variable per pass.
    for (int inner = 0; inner <= static_cast<int>(m); ++inner) {
      std::vector<Eigen::Index> free_idx;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (state[i] == State::Free) free_idx.push_back(i);
      }
      if (free_idx.empty()) break;
      Eigen::MatrixXd a_free(q, static_cast<Eigen::Index>(free_idx.size()));
      Eigen::VectorXd rhs = v;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (state[i] != State::Free) {
          rhs -= g[i] * zero_rows.row(i).transpose();
        }
      }
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        a_free.col(static_cast<Eigen::Index>(k)) =
            zero_rows.row(free_idx[k]).transpose();
      }
      const Eigen::VectorXd target =
          a_free.completeOrthogonalDecomposition().solve(rhs);

      // Largest step toward the target staying inside the box.
      double alpha = 1.0;
      Eigen::Index blocker = -1;
      double blocker_value = 0.0;
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const Eigen::Index i = free_idx[k];
        const double to = target[static_cast<Eigen::Index>(k)];
        if (to < lo - 1e-14 || to > hi + 1e-14) {
          const double bound = to < lo ? lo : hi;
          const double denom = to - g[i];
          if (std::abs(denom) > 1e-300) {
            const double step = (bound - g[i]) / denom;
            if (step < alpha) {
              alpha = step;
              blocker = i;
              blocker_value = bound;
            }
          }
        }
      }
      for (std::size_t k = 0; k < free_idx.size(); ++k) {
        const Eigen::Index i = free_idx[k];
        g[i] += alpha * (target[static_cast<Eigen::Index>(k)] - g[i]);
        g[i] = std::clamp(g[i], lo, hi);
      }
      if (blocker < 0) break;
      g[blocker] = blocker_value;
      state[blocker] = blocker_value == lo ? State::Lower : State::Upper;
    }
  }
  return {g, residual().norm()};
}

enum class PassOutcome { Optimal, Stalled };

// Strict-descent pivoting.  Each pivot walks the piecewise-linear objective
// along the pivot ray to its first profitable breakpoint, so the objective
// strictly decreases and no cycling is possible.  When degenerate zero rows
// block the ray, optimality is decided by certificate completion over the
// whole zero set; an infeasible completion reports a stall for the caller to
// resolve by tie-breaking.
PassOutcome purify_pass(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        double tau, const Eigen::VectorXd& start_theta,
                        int max_pivots, Vertex& out) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  const double y_scale = 1.0 + y.cwiseAbs().maxCoeff();
  const double opt_tol = 1e-10;
  const double res_zero = 1e-11 * y_scale;

  std::vector<Eigen::Index> basis = initial_basis(X, y - X * start_theta);

  Eigen::MatrixXd XB(q, q);
  Eigen::VectorXd yB(q);

  for (int pivot = 0;; ++pivot) {
    for (Eigen::Index j = 0; j < q; ++j) {
      XB.row(j) = X.row(basis[j]);
      yB[j] = y[basis[j]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(XB);
    const Eigen::VectorXd theta = lu.solve(yB);
    const Eigen::VectorXd r = y - X * theta;

    std::vector<bool> in_basis(n, false);
    for (auto i : basis) in_basis[i] = true;

    Eigen::VectorXd score_sum = Eigen::VectorXd::Zero(q);
    std::vector<Eigen::Index> extra_zeros;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[i]) continue;
      if (std::abs(r[i]) <= res_zero) {
        extra_zeros.push_back(i);
        continue;
      }
      score_sum += check_score(tau, r[i]) * X.row(i).transpose();
    }
    const Eigen::VectorXd g_basic = lu.transpose().solve(-score_sum);

    auto emit = [&](const Eigen::VectorXd& zero_cert,
                    const std::vector<Eigen::Index>& zero_rows) {
      Eigen::VectorXd certificate(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        certificate[i] =
            (std::abs(r[i]) <= res_zero) ? 0.0 : check_score(tau, r[i]);
      }
      for (std::size_t k = 0; k < zero_rows.size(); ++k) {
        certificate[zero_rows[k]] = zero_cert[static_cast<Eigen::Index>(k)];
      }
      out = {theta, basis, certificate};
    };

    // Fast path: the basic duals alone certify optimality (with the extra
    // zero rows carrying 0, itself a valid subgradient value).
    double worst_violation = opt_tol;
    Eigen::Index worst = -1;
    bool worst_above = false;
    for (Eigen::Index j = 0; j < q; ++j) {
      const double above = g_basic[j] - tau;
      const double below = (tau - 1.0) - g_basic[j];
      if (above > worst_violation) {
        worst_violation = above;
        worst = j;
        worst_above = true;
      }
      if (below > worst_violation) {
        worst_violation = below;
        worst = j;
        worst_above = false;
      }
    }
    if (worst < 0) {
      emit(g_basic, basis);
      return PassOutcome::Optimal;
    }

    // Degenerate vertex: decide optimality over the whole zero set before
    // attempting to move.
    if (!extra_zeros.empty()) {
      std::vector<Eigen::Index> zero_rows = basis;
      zero_rows.insert(zero_rows.end(), extra_zeros.begin(), extra_zeros.end());
      Eigen::MatrixXd rows(static_cast<Eigen::Index>(zero_rows.size()), q);
      for (std::size_t k = 0; k < zero_rows.size(); ++k) {
        rows.row(static_cast<Eigen::Index>(k)) = X.row(zero_rows[k]);
      }
      const CertificateCompletion completion =
          complete_certificate(rows, -score_sum, tau);
      if (completion.residual_norm <=
          1e-8 * (1.0 + score_sum.cwiseAbs().maxCoeff())) {
        emit(completion.g, zero_rows);
        return PassOutcome::Optimal;
      }
    }
    if (pivot >= max_pivots) return PassOutcome::Stalled;

    // Direction with x_j' dir = 1{j == worst} over the basis, signed so the
    // leaving residual moves toward the violated side: positive when its
    // dual exceeds tau, negative when it falls below tau - 1.
    Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
    e[worst] = 1.0;
    Eigen::VectorXd dir = lu.solve(e);
    if (worst_above) dir = -dir;

    double deriv = worst_above ? (tau - g_basic[worst])
                               : ((1.0 - tau) + g_basic[worst]);

    // Zero rows off the basis block the ray immediately; other rows cross
    // zero at s > 0 and raise the directional derivative by |c| there.
    struct Crossing {
      double s;
      double jump;
      Eigen::Index index;
    };
    std::vector<Crossing> crossings;
    crossings.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[i]) continue;
      const double c = X.row(i).dot(dir);
      if (std::abs(c) < 1e-13) continue;
      if (std::abs(r[i]) <= res_zero) {
        deriv += (c > 0.0) ? (1.0 - tau) * c : tau * (-c);
        continue;
      }
      const double s = r[i] / c;
      if (s > 0.0) crossings.push_back({s, std::abs(c), i});
    }
    if (deriv >= -1e-12) return PassOutcome::Stalled;

    std::sort(crossings.begin(), crossings.end(),
              [](const Crossing& a, const Crossing& b) {
                if (a.s != b.s) return a.s < b.s;
                return a.index < b.index;
              });
    Eigen::Index entering = -1;
    for (const auto& cross : crossings) {
      deriv += cross.jump;
      if (deriv >= 0.0) {
        entering = cross.index;
        break;
      }
    }
    if (entering < 0) {
      // Bounded objectives always hit a stopping breakpoint; treat anything
      // else as a stall below resolvable precision.
      return PassOutcome::Stalled;
    }
    basis[worst] = entering;
    std::sort(basis.begin(), basis.end());
  }
}

Vertex purify(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double tau,
              const Eigen::VectorXd& ipm_theta, const SolveOptions& options) {
  Vertex vertex;
  if (purify_pass(X, y, tau, ipm_theta, options.max_pivots, vertex) ==
      PassOutcome::Optimal) {
    return vertex;
  }

  // Ties stalled the descent.  Break them with a fixed microscopic
  // perturbation, descend there (strictly, since breakpoints are now
  // distinct), refit the resulting basis on the original responses, and
  // complete the certificate at that vertex.
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  const double y_scale = 1.0 + y.cwiseAbs().maxCoeff();
  Eigen::VectorXd yp = y;
  double frac = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    frac += 0.6180339887498949;
    frac -= std::floor(frac);
    // Comfortably above the zero-residual threshold so the ties really break.
    yp[i] += 1e-9 * y_scale * (frac - 0.5);
  }
  if (purify_pass(X, yp, tau, ipm_theta, 4 * options.max_pivots, vertex) ==
      PassOutcome::Stalled) {
    throw NumericError("solve_quantile: purification did not converge");
  }

  Eigen::MatrixXd XB(q, q);
  Eigen::VectorXd yB(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    XB.row(j) = X.row(vertex.basis[j]);
    yB[j] = y[vertex.basis[j]];
  }
  vertex.theta = Eigen::PartialPivLU<Eigen::MatrixXd>(XB).solve(yB);

  const Eigen::VectorXd r = y - X * vertex.theta;
  const double res_zero = 1e-11 * y_scale;
  std::vector<Eigen::Index> zero_rows;
  Eigen::VectorXd score_sum = Eigen::VectorXd::Zero(q);
  vertex.certificate.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(r[i]) <= res_zero) {
      zero_rows.push_back(i);
      vertex.certificate[i] = 0.0;
    } else {
      vertex.certificate[i] = check_score(tau, r[i]);
      score_sum += vertex.certificate[i] * X.row(i).transpose();
    }
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(zero_rows.size()), q);
  for (std::size_t k = 0; k < zero_rows.size(); ++k) {
    rows.row(static_cast<Eigen::Index>(k)) = X.row(zero_rows[k]);
  }
  const CertificateCompletion completion =
      complete_certificate(rows, -score_sum, tau);
  for (std::size_t k = 0; k < zero_rows.size(); ++k) {
    vertex.certificate[zero_rows[k]] =
        completion.g[static_cast<Eigen::Index>(k)];
  }
  return vertex;
}

}  // namespace

QuantileFit solve_quantile(const Eigen::MatrixXd& design,
                           const Eigen::VectorXd& y, double tau,
                           const std::optional<Eigen::VectorXd>& weights,
                           const SolveOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  if (n == 0 || q == 0) throw std::invalid_argument("solve_quantile: empty input");
  if (y.size() != n) throw std::invalid_argument("solve_quantile: y length mismatch");
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("solve_quantile: tau outside (0,1)");
  }
  if (!design.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("solve_quantile: non-finite entries");
  }
  if (weights) {
    if (weights->size() != n) {
      throw std::invalid_argument("solve_quantile: weights length mismatch");
    }
    if (!weights->allFinite() || weights->minCoeff() <= 0.0) {
      throw std::invalid_argument("solve_quantile: weights must be positive");
    }
  }

  // w * rho_tau(r) = rho_tau(w * r): scale rows and solve unweighted.
  Eigen::MatrixXd Xs = design;
  Eigen::VectorXd ys = y;
  if (weights) {
    Xs.array().colwise() *= weights->array();
    ys.array() *= weights->array();
  }

  // Equilibrate columns to unit max-abs; residuals are unchanged and the
  // coefficients are unscaled at the end.
  Eigen::VectorXd col_scale(q);
  for (Eigen::Index j = 0; j < q; ++j) {
    const double s = Xs.col(j).cwiseAbs().maxCoeff();
    col_scale[j] = (s > 0.0) ? s : 1.0;
    Xs.col(j) /= col_scale[j];
  }

  // Rank-revealing factorization; dependent columns are dropped and their
  // coefficients re-embedded as zeros.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  const bool rank_deficient = rank < q;

  Eigen::MatrixXd Xr;
  std::vector<Eigen::Index> kept;
  if (rank_deficient) {
    if (rank == 0) throw NumericError("solve_quantile: zero design matrix");
    kept.reserve(static_cast<std::size_t>(rank));
    for (Eigen::Index i = 0; i < rank; ++i) {
      kept.push_back(qr.colsPermutation().indices()[i]);
    }
    std::sort(kept.begin(), kept.end());
    Xr.resize(n, rank);
    for (Eigen::Index j = 0; j < rank; ++j) Xr.col(j) = Xs.col(kept[j]);
  } else {
    Xr = std::move(Xs);
  }

  // Least-squares start for the interior point method.
  Eigen::VectorXd theta0;
  if (rank_deficient) {
    theta0 = Xr.colPivHouseholderQr().solve(ys);
  } else {
    theta0 = qr.solve(ys);
  }

  InteriorPointResult ipm = interior_point(Xr, ys, tau, theta0, options);
  Eigen::VectorXd theta_r = ipm.theta;

  std::vector<Eigen::Index> basis;
  Eigen::VectorXd certificate;
  if (options.purify) {
    Vertex vertex = purify(Xr, ys, tau, theta_r, options);
    theta_r = vertex.theta;
    basis = std::move(vertex.basis);
    certificate = std::move(vertex.certificate);
  }

  QuantileFit fit;
  fit.tau = tau;
  fit.rank_deficient = rank_deficient;
  fit.iterations = ipm.iterations;
  if (rank_deficient) {
    fit.coefficients = Eigen::VectorXd::Zero(q);
    for (Eigen::Index j = 0; j < rank; ++j) {
      fit.coefficients[kept[j]] = theta_r[j] / col_scale[kept[j]];
    }
  } else {
    fit.coefficients = theta_r.cwiseQuotient(col_scale);
  }

  fit.residuals = y - design * fit.coefficients;
  fit.zero_tol = 1e-8 * (1.0 + y.cwiseAbs().maxCoeff());

  std::vector<bool> in_basis(n, false);
  for (std::size_t j = 0; j < basis.size(); ++j) in_basis[basis[j]] = true;

  fit.dual_certificate.resize(n);
  fit.zero_residual_count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool zero = in_basis[i] || std::abs(fit.residuals[i]) <= fit.zero_tol;
    if (zero) ++fit.zero_residual_count;
    if (certificate.size() == n) {
      fit.dual_certificate[i] = std::clamp(certificate[i], tau - 1.0, tau);
    } else {
      fit.dual_certificate[i] =
          zero ? 0.0 : check_score(tau, fit.residuals[i]);
    }
  }
  fit.objective = fit.recompute_objective(weights);
  return fit;
}

}  // namespace vcqr
