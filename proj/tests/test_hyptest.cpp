#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "basis.hpp"
#include "hyptest.hpp"
#include "knotsel.hpp"
#include "qrsolve.hpp"
#include "sim.hpp"
#include "stats.hpp"
#include "test_support.hpp"
#include "vcm.hpp"

using vcqr::BasisKind;
using vcqr::Calibration;
using vcqr::GammaDesign;
using vcqr::RaoTestReport;
using vcqr::VcDesign;
using vcqr::make_basis;
using vcqr::make_shared_design;

namespace {

Eigen::MatrixXd gamma_matrix(const GammaDesign& gamma, const vcqr::Dataset& data) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.n()),
                      static_cast<Eigen::Index>(gamma.design().width()));
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    out.row(ii) =
        gamma.gamma_row(data.t_unit(i), data.x().row(ii).transpose()).transpose();
  }
  return out;
}

}  // namespace

TEST_CASE("gamma design widths and the (1, t) base case") {
  SUBCASE("intercept only, degree 1, no knots") {
    const GammaDesign gamma(
        make_shared_design(make_basis({}, 1, BasisKind::BSpline), 0));
    CHECK(gamma.x_block_width() == 1);
    CHECK(gamma.gamma2_width() == 1);
    Eigen::VectorXd x(1);
    x << 1.0;
    for (double u : {0.0, 0.25, 0.7, 1.0}) {
      const Eigen::VectorXd row = gamma.gamma_row(u, x);
      CHECK(row[0] == doctest::Approx(1.0));
      CHECK(row[1] == doctest::Approx(u));  // the non-constant hat is u itself
    }
  }

  SUBCASE("shared degree-1 basis with k knots") {
    for (std::size_t k : {0u, 1u, 3u}) {
      std::vector<double> knots;
      for (std::size_t i = 1; i <= k; ++i) {
        knots.push_back(static_cast<double>(i) / (k + 1));
      }
      const GammaDesign gamma(
          make_shared_design(make_basis(knots, 1, BasisKind::BSpline), 1));
      CHECK(gamma.x_block_width() == 2);
      CHECK(gamma.gamma2_width() == 2 * (k + 1));
    }
  }
}

TEST_CASE("gamma transformation matrix reproduces the gamma rows") {
  const auto data = test_support::vc_dataset(
      25, [](double t) { return t; }, [](double t) { return 1.0 - t; }, 0.5, 7);
  for (auto kind : {BasisKind::BSpline, BasisKind::TruncatedPower}) {
    const VcDesign design =
        make_shared_design(make_basis({0.4, 0.7}, 1, kind), 1);
    const GammaDesign gamma(design);
    const Eigen::MatrixXd a = gamma.transformation_matrix();
    CHECK(std::abs(Eigen::FullPivLU<Eigen::MatrixXd>(a).determinant()) > 1e-12);
    for (std::size_t i = 0; i < data.get()->n(); i += 5) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      const Eigen::VectorXd pi_row =
          design.design_row(data->t_unit(i), data->x().row(ii).transpose());
      const Eigen::VectorXd g_row =
          gamma.gamma_row(data->t_unit(i), data->x().row(ii).transpose());
      CHECK((a * pi_row - g_row).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("objective is invariant under the gamma reparameterization") {
  const auto data = test_support::vc_dataset(
      60, [](double t) { return std::sin(4.0 * t); },
      [](double t) { return t; }, 0.4, 9);
  const VcDesign design =
      make_shared_design(make_basis({0.3, 0.6}, 1, BasisKind::BSpline), 1);
  const GammaDesign gamma(design);
  const Eigen::MatrixXd pi_m = vcqr::expand_design(*data, design);
  const Eigen::MatrixXd ga_m = gamma_matrix(gamma, *data);
  const double obj_pi = vcqr::solve_quantile(pi_m, data->y(), 0.3).objective;
  const double obj_ga = vcqr::solve_quantile(ga_m, data->y(), 0.3).objective;
  CHECK(obj_pi == doctest::Approx(obj_ga).epsilon(1e-8));
}

TEST_CASE("exact linear data gives a zero statistic and p-value one") {
  const auto data = test_support::vc_dataset(
      50, [](double) { return 1.0; }, [](double) { return 2.0; }, 0.0, 13);
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const RaoTestReport report = vcqr::rao_score_test(*data, 0.5, design);
  CHECK(report.statistic <= 1e-10);
  CHECK(report.p_value == doctest::Approx(1.0));
}

TEST_CASE("df bookkeeping") {
  // p = 1, degree 1: df = p_k - (p+1) = (p+1)(k0+1).
  for (std::size_t k0 : {1u, 2u, 4u}) {
    std::vector<double> knots;
    for (std::size_t i = 1; i <= k0; ++i) {
      knots.push_back(static_cast<double>(i) / (k0 + 1));
    }
    const auto data = test_support::vc_dataset(
        100, [](double) { return 1.0; }, [](double) { return 1.0; }, 1.0, 15);
    const VcDesign design =
        make_shared_design(make_basis(knots, 1, BasisKind::BSpline), 1);
    const RaoTestReport report = vcqr::rao_score_test(*data, 0.5, design);
    CHECK(report.df == 2 * (k0 + 1));
    CHECK(report.sigma2 == doctest::Approx(0.25));
  }
}

TEST_CASE("statistic is invariant under null-absorbable transforms") {
  const auto data = test_support::vc_dataset(
      150, [](double) { return 0.5; }, [](double) { return -1.0; }, 1.0, 17);
  const VcDesign design =
      make_shared_design(make_basis({0.35, 0.7}, 1, BasisKind::BSpline), 1);
  const RaoTestReport base = vcqr::rao_score_test(*data, 0.3, design);

  const double c = 2.5;
  Eigen::VectorXd d(2);
  d << 0.7, -1.3;
  auto transformed = std::make_shared<vcqr::Dataset>(
      data->t(), data->x(), (c * data->y() + data->x() * d).eval(),
      data->t_map());
  const RaoTestReport moved = vcqr::rao_score_test(*transformed, 0.3, design);
  CHECK(moved.statistic == doctest::Approx(base.statistic).epsilon(1e-8));
}

TEST_CASE("statistic is invariant under reparameterizations of gamma2") {
  // Recompute the statistic by hand with a transformed Gamma_2 block and
  // compare with the library value.
  const auto data = test_support::vc_dataset(
      120, [](double) { return 1.0; }, [](double) { return 1.0; }, 1.0, 19);
  const double tau = 0.5;
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const RaoTestReport report = vcqr::rao_score_test(*data, tau, design);

  const GammaDesign gamma(design);
  const std::size_t g2w = gamma.gamma2_width();
  Eigen::MatrixXd g2(static_cast<Eigen::Index>(data->n()),
                     static_cast<Eigen::Index>(g2w));
  for (std::size_t i = 0; i < data->n(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    g2.row(ii) =
        gamma.gamma2_row(data->t_unit(i), data->x().row(ii).transpose())
            .transpose();
  }
  // Any invertible mix of the Gamma_2 coordinates.
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(g2w, g2w);
  m(0, 1) = 0.8;
  m(2, 0) = -0.4;
  m(3, 3) = 2.0;
  const Eigen::MatrixXd g2t = g2 * m.transpose();

  const vcqr::QuantileFit null_fit =
      vcqr::solve_quantile(data->x(), data->y(), tau);
  Eigen::VectorXd phi(data->n());
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    phi[i] = std::abs(null_fit.residuals[i]) <= null_fit.zero_tol
                 ? 0.0
                 : vcqr::check_score(tau, null_fit.residuals[i]);
  }
  const auto stat =
      vcqr::schur_score_statistic(data->x(), g2t, phi, tau);
  REQUIRE(stat.has_value());
  CHECK(*stat == doctest::Approx(report.statistic).epsilon(1e-8));
}

TEST_CASE("phi second moment matches tau(1-tau) for every error law") {
  for (auto kind : {vcqr::ErrorKind::StdNormal, vcqr::ErrorKind::ScaledChiSq1,
                    vcqr::ErrorKind::ScaledT3}) {
    for (double tau : {0.5, 0.9}) {
      vcqr::RngStream rng(1000 + static_cast<int>(kind));
      const double q = vcqr::error_quantile(kind, tau);
      const std::size_t n = 1000000;
      double sum = 0.0, sum_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double e = vcqr::sample_error(kind, rng) - q;
        const double phi = vcqr::check_score(tau, e);
        sum += phi * phi;
        sum_sq += phi * phi * phi * phi;
      }
      const double mean = sum / n;
      const double var = sum_sq / n - mean * mean;
      const double se = std::sqrt(var / n);
      CHECK(std::abs(mean - tau * (1.0 - tau)) <= 3.0 * se + 1e-6);
    }
  }
}

TEST_CASE("chi-square calibration under a fixed-knot null"
          * doctest::timeout(300)) {
  // n = 2000, k0 = 2 interior knots, df = 6; the empirical law of |w|^2 over
  // replications must pass a KS test against chi-square(6) at level 0.01.
  const std::size_t reps = 2000;
  const VcDesign design = make_shared_design(
      make_basis({1.0 / 3.0, 2.0 / 3.0}, 1, BasisKind::BSpline), 1);
  std::vector<double> stats_sample(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto data = test_support::vc_dataset(
        2000, [](double) { return 1.0; }, [](double) { return 1.0; }, 1.0,
        5000 + r);
    stats_sample[r] = vcqr::rao_score_test(*data, 0.5, design).statistic;
  }
  std::sort(stats_sample.begin(), stats_sample.end());
  double d = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    const double cdf = vcqr::stats::chi_squared_cdf(stats_sample[i], 6.0);
    const double hi = static_cast<double>(i + 1) / reps;
    const double lo = static_cast<double>(i) / reps;
    d = std::max({d, std::abs(cdf - hi), std::abs(cdf - lo)});
  }
  const double p = vcqr::stats::ks_p_value(d, reps);
  CHECK(p > 0.01);
}

TEST_CASE("normal calibration trend for growing df" * doctest::timeout(300)) {
  const std::size_t reps = 400;
  for (std::size_t k : {2u, 8u, 20u}) {
    std::vector<double> knots;
    for (std::size_t i = 1; i <= k; ++i) {
      knots.push_back(static_cast<double>(i) / (k + 1));
    }
    const VcDesign design =
        make_shared_design(make_basis(knots, 1, BasisKind::BSpline), 1);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto data = test_support::vc_dataset(
          4000, [](double) { return 1.0; }, [](double) { return 1.0; }, 1.0,
          9000 + 100 * k + r);
      const double z = vcqr::rao_score_test(*data, 0.5, design).standardized;
      sum += z;
      sum_sq += z * z;
    }
    const double mean = sum / reps;
    const double var = sum_sq / reps - mean * mean;
    CHECK(std::abs(mean) <= 0.2);
    CHECK(var >= 0.7);
    CHECK(var <= 1.4);
  }
}

TEST_CASE("lr statistic basics") {
  const auto data = test_support::vc_dataset(
      60, [](double t) { return 1.0 + t; }, [](double) { return 1.0; }, 0.5,
      23);

  SUBCASE("alternative equal to the null span gives l = 0, p = 1") {
    const VcDesign constant =
        make_shared_design(make_basis({}, 0, BasisKind::BSpline), 1);
    const auto report = vcqr::lr_test(*data, 0.5, constant, 50, 7);
    CHECK(std::abs(report.statistic) <= 1e-8);
    CHECK(report.p_value == doctest::Approx(1.0));
  }

  SUBCASE("nesting keeps the statistic nonnegative") {
    const VcDesign design =
        make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
    const auto report = vcqr::lr_test(*data, 0.25, design, 30, 11);
    CHECK(report.statistic >= -1e-8);
    CHECK(report.bootstrap_statistics.size() == 30);
    for (double lb : report.bootstrap_statistics) CHECK(lb >= -1e-8);
    CHECK(report.p_value > 0.0);
    CHECK(report.p_value <= 1.0);
  }

  SUBCASE("bootstrap count must be positive") {
    const VcDesign design =
        make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
    CHECK_THROWS_AS(vcqr::lr_test(*data, 0.5, design, 0, 1),
                    std::invalid_argument);
  }
}

TEST_CASE("scale estimation") {
  SUBCASE("homoscedastic data yields a near-constant scale") {
    const auto data = test_support::vc_dataset(
        2000, [](double) { return 1.0; }, [](double) { return 2.0; }, 0.8, 29);
    const vcqr::ScaleModel scale = vcqr::estimate_scale(*data);
    // gamma = (t, intercept, x...) coefficients: the t slope is tiny next to
    // the intercept level.
    CHECK(std::abs(scale.gamma_hat[0]) <= 0.1 * std::abs(scale.gamma_hat[1]));
    CHECK(!scale.floor_applied);
  }

  SUBCASE("M2 scale direction is recovered") {
    vcqr::SimulationConfig config;
    config.model = vcqr::SimModel::M2;
    config.n = 2000;
    config.seed = 31;
    const auto data = vcqr::generate(config, 0);
    const vcqr::ScaleModel scale = vcqr::estimate_scale(*data);
    Eigen::VectorXd truth(data->n());
    for (std::size_t i = 0; i < data->n(); ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      truth[ii] = std::abs(config.gamma3 * data->t()[i] +
                           config.gamma4 * data->x()(ii, 1)) +
                  0.05;
    }
    const Eigen::VectorXd est = scale.sigma_hat;
    const double corr =
        ((est.array() - est.mean()) * (truth.array() - truth.mean())).sum() /
        std::sqrt((est.array() - est.mean()).square().sum() *
                  (truth.array() - truth.mean()).square().sum());
    CHECK(corr >= 0.9);
  }

  SUBCASE("degenerate residuals fall back to the floor") {
    const auto data = test_support::vc_dataset(
        40, [](double) { return 1.0; }, [](double) { return 2.0; }, 0.0, 37);
    const vcqr::ScaleModel scale = vcqr::estimate_scale(*data, 0.01);
    CHECK(scale.floor_applied);
    CHECK(scale.sigma_hat.minCoeff() == doctest::Approx(0.01));
    CHECK(scale.sigma_hat.maxCoeff() == doctest::Approx(0.01));
  }
}

TEST_CASE("weighted test with a constant scale equals the plain test") {
  const auto data = test_support::vc_dataset(
      150, [](double) { return 1.0; }, [](double) { return 1.0; }, 1.0, 41);
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const RaoTestReport plain = vcqr::rao_score_test(*data, 0.5, design);
  vcqr::ScaleModel scale;
  scale.gamma_hat = Eigen::VectorXd::Zero(3);
  scale.sigma_hat = Eigen::VectorXd::Constant(data->n(), 3.7);
  scale.scale_floor = 1e-8;
  const RaoTestReport weighted =
      vcqr::rao_score_test_weighted(*data, 0.5, design, scale);
  CHECK(weighted.statistic == doctest::Approx(plain.statistic).epsilon(1e-8));
  CHECK(weighted.df == plain.df);
}

TEST_CASE("calibration selection switches at df 40") {
  const auto small = test_support::vc_dataset(
      300, [](double) { return 1.0; }, [](double) { return 1.0; }, 1.0, 43);
  const VcDesign narrow =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  CHECK(vcqr::rao_score_test(*small, 0.5, narrow).calibration_used ==
        Calibration::ChiSq);

  std::vector<double> many;
  for (int i = 1; i <= 20; ++i) many.push_back(i / 21.0);
  const VcDesign wide =
      make_shared_design(make_basis(many, 1, BasisKind::BSpline), 1);
  CHECK(vcqr::rao_score_test(*small, 0.5, wide).calibration_used ==
        Calibration::Normal);
}
