// Shared helpers for building synthetic datasets in tests.
#ifndef VCQR_TESTS_TEST_SUPPORT_HPP_
#define VCQR_TESTS_TEST_SUPPORT_HPP_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace test_support {

// y_i = beta0(t_i) + beta1(t_i) x_i + noise_sd * e_i on t ~ U(lo, hi),
// x truncated standard normal at 2.
inline std::shared_ptr<const vcqr::Dataset> vc_dataset(
    std::size_t n, const std::function<double(double)>& beta0,
    const std::function<double(double)>& beta1, double noise_sd,
    std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  vcqr::RngStream rng(seed);
  std::vector<double> t(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    t[i] = rng.uniform(lo, hi);
    double z = rng.normal();
    if (z > 2.0) z = 2.0;
    if (z < -2.0) z = -2.0;
    x(ii, 0) = 1.0;
    x(ii, 1) = z;
    y[ii] = beta0(t[i]) + beta1(t[i]) * z + noise_sd * rng.normal();
  }
  return std::make_shared<vcqr::Dataset>(std::move(t), std::move(x),
                                         std::move(y), vcqr::TMap{lo, hi});
}

}  // namespace test_support

#endif  // VCQR_TESTS_TEST_SUPPORT_HPP_
