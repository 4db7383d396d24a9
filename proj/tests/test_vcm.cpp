#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "basis.hpp"
#include "sim.hpp"
#include "test_support.hpp"
#include "vcm.hpp"

using vcqr::BasisKind;
using vcqr::VcDesign;
using vcqr::VcqrModel;
using vcqr::fit_vcqr;
using vcqr::make_basis;
using vcqr::make_shared_design;

TEST_CASE("constant-coefficient truth is recovered exactly") {
  const auto data = test_support::vc_dataset(
      80, [](double) { return 2.0; }, [](double) { return -1.5; }, 0.0, 3);
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const VcqrModel model = fit_vcqr(data, 0.5, design);
  CHECK(model.fit().objective <= 1e-9);
  for (int i = 0; i <= 20; ++i) {
    const double t = data->t_map().lo + data->t_map().scale() * i / 20.0;
    CHECK(std::abs(model.eval_coefficient(0, t, 0) - 2.0) <= 1e-6);
    CHECK(std::abs(model.eval_coefficient(1, t, 0) + 1.5) <= 1e-6);
    CHECK(std::abs(model.eval_coefficient(0, t, 1)) <= 1e-6);
  }
}

TEST_CASE("linear truth lies in the span") {
  // Intercept-only model with y = 2t, fitted on a no-knot linear basis.
  const std::size_t n = 50;
  vcqr::RngStream rng(5);
  std::vector<double> t(n);
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = rng.uniform();
    y[static_cast<Eigen::Index>(i)] = 2.0 * t[i];
  }
  const auto data = std::make_shared<vcqr::Dataset>(std::move(t), std::move(x),
                                                    std::move(y),
                                                    vcqr::TMap{0.0, 1.0});
  const VcDesign design =
      make_shared_design(make_basis({}, 1, BasisKind::BSpline), 0);
  const VcqrModel model = fit_vcqr(data, 0.5, design);
  for (double tt : {0.0, 0.31, 0.5, 0.77, 1.0}) {
    CHECK(std::abs(model.eval_coefficient(0, tt, 0) - 2.0 * tt) <= 1e-8);
    CHECK(std::abs(model.eval_coefficient(0, tt, 1) - 2.0) <= 1e-6);
    CHECK(model.eval_coefficient(0, tt, 2) == 0.0);  // beyond the degree
  }
}

TEST_CASE("spline fit beats the best constant-coefficient fit under a sine") {
  vcqr::SimulationConfig config;
  config.model = vcqr::SimModel::M1;
  config.alternative = vcqr::AlternativeKind::Sine;
  config.n = 200;
  config.seed = 17;
  const auto data = vcqr::generate(config, 0);
  const VcDesign spline = make_shared_design(
      make_basis({0.25, 0.5, 0.75}, 1, BasisKind::BSpline), 1);
  const VcDesign constant =
      make_shared_design(make_basis({}, 0, BasisKind::BSpline), 1);
  const double obj_spline = fit_vcqr(data, 0.5, spline).fit().objective;
  const double obj_constant = fit_vcqr(data, 0.5, constant).fit().objective;
  CHECK(obj_spline < obj_constant);
}

TEST_CASE("prediction bookkeeping identity") {
  // y_i - residual_i reproduces the fitted value with no error beyond the
  // single rounding of the stored difference.
  const auto data = test_support::vc_dataset(
      60, [](double t) { return std::sin(3.0 * t); },
      [](double t) { return t; }, 0.5, 11);
  const VcDesign design =
      make_shared_design(make_basis({0.4, 0.7}, 1, BasisKind::BSpline), 1);
  const VcqrModel model = fit_vcqr(data, 0.25, design);
  const double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t i = 0; i < data->n(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    const double fitted =
        model.predict(data->t()[i], data->x().row(ii).transpose());
    const double y = data->y()[ii];
    const double r = model.fit().residuals[ii];
    CHECK(std::abs((y - r) - fitted) <=
          eps * (std::abs(y) + std::abs(r) + std::abs(fitted)));
  }
}

TEST_CASE("prediction is linear in x") {
  const auto data = test_support::vc_dataset(
      40, [](double t) { return t; }, [](double) { return 1.0; }, 0.3, 23);
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const VcqrModel model = fit_vcqr(data, 0.5, design);
  Eigen::VectorXd xa(2), xb(2);
  xa << 1.0, 0.7;
  xb << 1.0, 1.4;
  const double t = 0.42;
  const double beta0 = model.eval_coefficient(0, t, 0);
  const double fa = model.predict(t, xa);
  const double fb = model.predict(t, xb);
  CHECK(fb - beta0 == doctest::Approx(2.0 * (fa - beta0)).epsilon(1e-12));
}

TEST_CASE("mise basics") {
  const auto data = test_support::vc_dataset(
      60, [](double) { return 1.0; }, [](double) { return 2.0; }, 0.0, 31);
  const VcDesign design =
      make_shared_design(make_basis({}, 1, BasisKind::BSpline), 1);
  const VcqrModel model = fit_vcqr(data, 0.5, design);
  std::vector<double> grid;
  for (int i = 0; i <= 50; ++i) {
    grid.push_back(data->t_map().lo + data->t_map().scale() * i / 50.0);
  }

  SUBCASE("truth equal to the fit gives zero") {
    std::vector<std::vector<vcqr::CoefficientFunction>> truth = {
        {[&](double t) { return model.eval_coefficient(0, t, 0); }},
        {[&](double t) { return model.eval_coefficient(1, t, 0); }}};
    const Eigen::MatrixXd err = mise(model, truth, grid);
    CHECK(err.maxCoeff() <= 1e-18);
  }

  SUBCASE("constant shift squares") {
    const double shift = 0.3;
    std::vector<std::vector<vcqr::CoefficientFunction>> truth = {
        {[&](double t) { return model.eval_coefficient(0, t, 0) + shift; }},
        {[&](double t) { return model.eval_coefficient(1, t, 0); }}};
    const Eigen::MatrixXd err = mise(model, truth, grid);
    CHECK(err(0, 0) == doctest::Approx(shift * shift).epsilon(1e-9));
    CHECK(err(1, 0) <= 1e-18);
  }
}

TEST_CASE("adding a knot never increases the objective") {
  const auto data = test_support::vc_dataset(
      120, [](double t) { return std::sin(5.0 * t); },
      [](double t) { return 1.0 + t; }, 0.4, 41);
  double previous = std::numeric_limits<double>::infinity();
  std::vector<double> knots;
  for (double k : {0.3, 0.55, 0.8}) {
    knots.push_back(k);
    const VcDesign design =
        make_shared_design(make_basis(knots, 1, BasisKind::BSpline), 1);
    const double objective = fit_vcqr(data, 0.5, design).fit().objective;
    CHECK(objective <= previous + 1e-8);
    previous = objective;
  }
}

TEST_CASE("scale equivariance of fitted curves") {
  const auto data = test_support::vc_dataset(
      70, [](double t) { return t * t; }, [](double t) { return 1.0 - t; },
      0.3, 53);
  const double c = 4.0;
  auto scaled = std::make_shared<vcqr::Dataset>(
      data->t(), data->x(), (c * data->y()).eval(), data->t_map());
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const VcqrModel base = fit_vcqr(data, 0.3, design);
  const VcqrModel big = fit_vcqr(scaled, 0.3, design);
  for (double t : {0.1, 0.35, 0.62, 0.9}) {
    for (std::size_t j : {0, 1}) {
      CHECK(big.eval_coefficient(j, t, 0) ==
            doctest::Approx(c * base.eval_coefficient(j, t, 0))
                .epsilon(1e-7));
    }
  }
}

TEST_CASE("fitted quantile levels do not cross on large constant-truth samples") {
  const auto data = test_support::vc_dataset(
      2000, [](double) { return 1.0; }, [](double) { return 0.5; }, 1.0, 61);
  const VcDesign design =
      make_shared_design(make_basis({0.33, 0.66}, 1, BasisKind::BSpline), 1);
  const VcqrModel low = fit_vcqr(data, 0.25, design);
  const VcqrModel high = fit_vcqr(data, 0.75, design);
  for (int i = 0; i <= 40; ++i) {
    const double t = 0.02 + 0.96 * i / 40.0;
    CHECK(high.eval_coefficient(0, t, 0) >=
          low.eval_coefficient(0, t, 0) - 1e-6);
  }
}

TEST_CASE("fit and evaluation contracts") {
  const auto data = test_support::vc_dataset(
      30, [](double) { return 1.0; }, [](double) { return 1.0; }, 0.1, 71);
  const VcDesign design =
      make_shared_design(make_basis({0.5}, 1, BasisKind::BSpline), 1);
  const VcqrModel model = fit_vcqr(data, 0.5, design);

  CHECK_THROWS_AS(model.eval_coefficient(5, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(model.eval_coefficient(0, data->t_map().lo - 0.1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.eval_coefficient(0, data->t_map().hi + 0.1, 0),
                  std::invalid_argument);

  // A design wider than the sample is rejected.
  const auto tiny = test_support::vc_dataset(
      5, [](double) { return 1.0; }, [](double) { return 1.0; }, 0.1, 73);
  const VcDesign wide = make_shared_design(
      make_basis({0.2, 0.4, 0.6, 0.8}, 1, BasisKind::BSpline), 1);
  CHECK_THROWS_AS(fit_vcqr(tiny, 0.5, wide), std::invalid_argument);
}
