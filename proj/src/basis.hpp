#ifndef VCQR_BASIS_HPP_
#define VCQR_BASIS_HPP_

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace vcqr {

enum class BasisKind { BSpline, TruncatedPower };

// Interior knots inside an open domain interval.  The extended partition for
// B-spline evaluation repeats each boundary knot (degree + 1) times.
class KnotVector {
 public:
  KnotVector(std::vector<double> interior, double domain_lo = 0.0,
             double domain_hi = 1.0);

  const std::vector<double>& interior() const { return interior_; }
  std::size_t count() const { return interior_.size(); }
  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }

  // Boundary knots repeated with multiplicity (degree + 1).
  std::vector<double> extended(int degree) const;

 private:
  std::vector<double> interior_;
  double lo_;
  double hi_;
};

// A univariate spline basis of dimension k + m + 1 on [lo, hi], either
// normalized B-splines (order m + 1) or the truncated power functions
// {1, t, ..., t^m, (t - kappa_1)_+^m, ...}.  Immutable after construction;
// evaluation is pure.
class SplineBasis {
 public:
  SplineBasis(KnotVector knots, int degree, BasisKind kind);

  std::size_t dimension() const { return knots_.count() + degree_ + 1; }
  int degree() const { return degree_; }
  BasisKind kind() const { return kind_; }
  const KnotVector& knots() const { return knots_; }

  // Values (or deriv-th derivatives) of all basis functions at t.  Evaluation
  // uses right limits at knots and the left limit at the right endpoint;
  // deriv > degree yields the zero vector.
  Eigen::VectorXd evaluate(double t, int deriv = 0) const;

 private:
  Eigen::VectorXd eval_bspline(double t, int deriv) const;
  Eigen::VectorXd eval_truncated_power(double t, int deriv) const;

  KnotVector knots_;
  int degree_;
  BasisKind kind_;
  std::vector<double> extended_;  // cached extended partition (BSpline)
};

SplineBasis make_basis(const std::vector<double>& interior_knots, int degree,
                       BasisKind kind, double domain_lo = 0.0,
                       double domain_hi = 1.0);

// Design for the varying-coefficient expansion: one basis per covariate
// (covariate 0 is the intercept slot).  The row at (t, x) concatenates
// x_j * basis_j(t) over j.
class VcDesign {
 public:
  explicit VcDesign(std::vector<SplineBasis> bases);

  std::size_t num_coefficients() const { return bases_.size(); }
  std::size_t p() const { return bases_.size() - 1; }
  const SplineBasis& basis(std::size_t j) const { return bases_.at(j); }
  std::size_t width() const { return width_; }

  // Offset of coefficient j's block inside a design row.
  std::size_t block_offset(std::size_t j) const { return offsets_.at(j); }
  std::size_t block_size(std::size_t j) const { return bases_.at(j).dimension(); }

  Eigen::VectorXd design_row(double t, const Eigen::VectorXd& x) const;

 private:
  std::vector<SplineBasis> bases_;
  std::vector<std::size_t> offsets_;
  std::size_t width_;
};

// Shared-basis design: the same basis for the intercept and all p covariates.
VcDesign make_shared_design(const SplineBasis& basis, std::size_t p);

// Eigenvalue range of the scaled empirical Gram matrix (k/n) sum_i Pi_i Pi_i^T
// with k = max(interior knot count, 1).  Conditioning diagnostic; a
// rank-deficient sample reports min eigenvalue 0 instead of raising.
std::pair<double, double> gram_eigen_diagnostic(
    const VcDesign& design, const std::vector<double>& t,
    const Eigen::MatrixXd& x);

}  // namespace vcqr

#endif  // VCQR_BASIS_HPP_
