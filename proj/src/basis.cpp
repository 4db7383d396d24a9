#include "basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "errors.hpp"

namespace vcqr {

KnotVector::KnotVector(std::vector<double> interior, double domain_lo,
                       double domain_hi)
    : interior_(std::move(interior)), lo_(domain_lo), hi_(domain_hi) {
  if (!(lo_ < hi_)) {
    throw std::invalid_argument("KnotVector: domain must satisfy lo < hi");
  }
  for (std::size_t i = 0; i < interior_.size(); ++i) {
    if (!std::isfinite(interior_[i])) {
      throw std::invalid_argument("KnotVector: non-finite knot");
    }
    if (!(interior_[i] > lo_ && interior_[i] < hi_)) {
      throw std::invalid_argument("KnotVector: knot outside the open domain");
    }
    if (i > 0 && !(interior_[i] > interior_[i - 1])) {
      throw std::invalid_argument("KnotVector: knots must be strictly increasing");
    }
  }
}

std::vector<double> KnotVector::extended(int degree) const {
  const int order = degree + 1;
  std::vector<double> ext;
  ext.reserve(interior_.size() + 2 * static_cast<std::size_t>(order));
  for (int i = 0; i < order; ++i) ext.push_back(lo_);
  ext.insert(ext.end(), interior_.begin(), interior_.end());
  for (int i = 0; i < order; ++i) ext.push_back(hi_);
  return ext;
}

SplineBasis::SplineBasis(KnotVector knots, int degree, BasisKind kind)
    : knots_(std::move(knots)), degree_(degree), kind_(kind) {
  if (degree_ < 0) throw std::invalid_argument("SplineBasis: negative degree");
  if (kind_ == BasisKind::BSpline) extended_ = knots_.extended(degree_);
}

SplineBasis make_basis(const std::vector<double>& interior_knots, int degree,
                       BasisKind kind, double domain_lo, double domain_hi) {
  return SplineBasis(KnotVector(interior_knots, domain_lo, domain_hi), degree,
                     kind);
}

Eigen::VectorXd SplineBasis::evaluate(double t, int deriv) const {
  const double lo = knots_.domain_lo();
  const double hi = knots_.domain_hi();
  const double slack = 1e-12 * (hi - lo);
  if (t < lo - slack || t > hi + slack) {
    throw std::invalid_argument("SplineBasis: evaluation point outside domain");
  }
  t = std::clamp(t, lo, hi);
  if (deriv < 0) throw std::invalid_argument("SplineBasis: negative derivative");
  if (deriv > degree_) {
    return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension()));
  }
  return kind_ == BasisKind::BSpline ? eval_bspline(t, deriv)
                                     : eval_truncated_power(t, deriv);
}

// Cox-de Boor recursion on the extended partition.  Values of lower-degree
// bases are raised one degree at a time; derivatives apply the standard
// difference formula once per derivative order.  Knot intervals of length
// zero (the repeated boundary knots) contribute nothing.
Eigen::VectorXd SplineBasis::eval_bspline(double t, int deriv) const {
  const std::vector<double>& knots = extended_;
  const int order = degree_ + 1;
  const int dim = static_cast<int>(dimension());
  const double hi = knots_.domain_hi();

  // Degree-0 seed: indicator of the half-open span [knots[i], knots[i+1]),
  // except the last nonempty span which is closed at the right endpoint.
  const int num0 = dim + degree_;  // number of degree-0 functions
  Eigen::VectorXd values = Eigen::VectorXd::Zero(num0);
  for (int i = 0; i < num0; ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    if (a == b) continue;
    if ((t >= a && t < b) || (t == hi && b == hi)) {
      values[i] = 1.0;
      break;
    }
  }

  const int raise_steps = degree_ - deriv;
  for (int d = 1; d <= raise_steps; ++d) {
    const int num_d = num0 - d;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(num_d);
    for (int i = 0; i < num_d; ++i) {
      double acc = 0.0;
      const double den1 = knots[i + d] - knots[i];
      if (den1 > 0.0) acc += (t - knots[i]) / den1 * values[i];
      const double den2 = knots[i + d + 1] - knots[i + 1];
      if (den2 > 0.0) acc += (knots[i + d + 1] - t) / den2 * values[i + 1];
      next[i] = acc;
    }
    values = std::move(next);
  }

  // values now holds the degree (degree_ - deriv) basis; differentiate up.
  for (int d = raise_steps + 1; d <= degree_; ++d) {
    const int num_d = num0 - d;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(num_d);
    for (int i = 0; i < num_d; ++i) {
      double acc = 0.0;
      const double den1 = knots[i + d] - knots[i];
      if (den1 > 0.0) acc += values[i] / den1;
      const double den2 = knots[i + d + 1] - knots[i + 1];
      if (den2 > 0.0) acc -= values[i + 1] / den2;
      next[i] = static_cast<double>(d) * acc;
    }
    values = std::move(next);
  }
  return values;
}

Eigen::VectorXd SplineBasis::eval_truncated_power(double t, int deriv) const {
  const int dim = static_cast<int>(dimension());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  // Monomials 1, t, ..., t^m.
  for (int j = deriv; j <= degree_; ++j) {
    double coeff = 1.0;
    for (int l = 0; l < deriv; ++l) coeff *= static_cast<double>(j - l);
    out[j] = coeff * std::pow(t, j - deriv);
  }
  // (t - kappa)_+^m pieces; right-continuous in t and in every derivative.
  const auto& interior = knots_.interior();
  double fall = 1.0;
  for (int l = 0; l < deriv; ++l) fall *= static_cast<double>(degree_ - l);
  for (std::size_t k = 0; k < interior.size(); ++k) {
    const double u = t - interior[k];
    if (u >= 0.0) {
      out[degree_ + 1 + static_cast<int>(k)] =
          fall * std::pow(u, degree_ - deriv);
    }
  }
  return out;
}

VcDesign::VcDesign(std::vector<SplineBasis> bases) : bases_(std::move(bases)) {
  if (bases_.empty()) throw std::invalid_argument("VcDesign: no bases");
  width_ = 0;
  offsets_.reserve(bases_.size());
  for (const auto& b : bases_) {
    offsets_.push_back(width_);
    width_ += b.dimension();
  }
}

Eigen::VectorXd VcDesign::design_row(double t, const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != bases_.size()) {
    throw std::invalid_argument("design_row: covariate length mismatch");
  }
  if (x[0] != 1.0) {
    throw std::invalid_argument("design_row: x[0] must be 1 (intercept slot)");
  }
  Eigen::VectorXd row(static_cast<Eigen::Index>(width_));
  for (std::size_t j = 0; j < bases_.size(); ++j) {
    row.segment(static_cast<Eigen::Index>(offsets_[j]),
                static_cast<Eigen::Index>(bases_[j].dimension())) =
        x[static_cast<Eigen::Index>(j)] * bases_[j].evaluate(t, 0);
  }
  return row;
}

VcDesign make_shared_design(const SplineBasis& basis, std::size_t p) {
  std::vector<SplineBasis> bases(p + 1, basis);
  return VcDesign(std::move(bases));
}

std::pair<double, double> gram_eigen_diagnostic(const VcDesign& design,
                                                const std::vector<double>& t,
                                                const Eigen::MatrixXd& x) {
  const std::size_t n = t.size();
  if (n == 0) throw std::invalid_argument("gram_eigen_diagnostic: empty sample");
  if (static_cast<std::size_t>(x.rows()) != n) {
    throw std::invalid_argument("gram_eigen_diagnostic: t/x length mismatch");
  }
  std::size_t k = 1;
  for (std::size_t j = 0; j < design.num_coefficients(); ++j) {
    k = std::max(k, design.basis(j).knots().count());
  }
  const Eigen::Index w = static_cast<Eigen::Index>(design.width());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(w, w);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd row = design.design_row(t[i], x.row(i).transpose());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(row);
  }
  gram *= static_cast<double>(k) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      gram.selfadjointView<Eigen::Lower>());
  double min_ev = es.eigenvalues().minCoeff();
  double max_ev = es.eigenvalues().maxCoeff();
  if (min_ev < 0.0 && min_ev > -1e-10 * std::max(1.0, max_ev)) min_ev = 0.0;
  return {min_ev, max_ev};
}

}  // namespace vcqr
