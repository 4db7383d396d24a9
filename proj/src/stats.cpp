#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace vcqr::stats {

double normal_cdf(double x) {
  return boost::math::cdf(boost::math::normal_distribution<>(), x);
}

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double normal_pdf(double x) {
  return boost::math::pdf(boost::math::normal_distribution<>(), x);
}

double chi_squared_cdf(double x, double df) {
  if (x <= 0.0) return 0.0;
  return boost::math::cdf(boost::math::chi_squared_distribution<>(df), x);
}

double chi_squared_quantile(double p, double df) {
  return boost::math::quantile(boost::math::chi_squared_distribution<>(df), p);
}

double student_t_cdf(double x, double df) {
  return boost::math::cdf(boost::math::students_t_distribution<>(df), x);
}

double student_t_quantile(double p, double df) {
  return boost::math::quantile(boost::math::students_t_distribution<>(df), p);
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("sample_quantile: empty sample");
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("sample_quantile: p outside [0,1]");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 1) return values[0];
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

double order_statistic_quantile(std::vector<double> values, double tau) {
  if (values.empty()) {
    throw std::invalid_argument("order_statistic_quantile: empty sample");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("order_statistic_quantile: tau outside (0,1)");
  }
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n)));
  if (k == 0) k = 1;
  if (k > n) k = n;
  return values[k - 1];
}

double ks_p_value(double d, std::size_t n) {
  if (d <= 0.0) return 1.0;
  const double x = std::sqrt(static_cast<double>(n)) * d;
  // Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace vcqr::stats
