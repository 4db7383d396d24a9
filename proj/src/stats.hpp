#ifndef VCQR_STATS_HPP_
#define VCQR_STATS_HPP_

#include <cstddef>
#include <vector>

namespace vcqr::stats {

double normal_cdf(double x);
double normal_quantile(double p);
double normal_pdf(double x);

double chi_squared_cdf(double x, double df);
double chi_squared_quantile(double p, double df);

double student_t_cdf(double x, double df);
double student_t_quantile(double p, double df);

// Type-7 (linear interpolation) sample quantile of an unsorted sample.
double sample_quantile(std::vector<double> values, double p);

// Lower endpoint of the set of tau-th sample quantiles in the check-loss
// sense: the ceil(n*tau)-th order statistic.
double order_statistic_quantile(std::vector<double> values, double tau);

// Asymptotic Kolmogorov-Smirnov p-value for statistic d with sample size n.
double ks_p_value(double d, std::size_t n);

}  // namespace vcqr::stats

#endif  // VCQR_STATS_HPP_
