#ifndef VCQR_SIM_HPP_
#define VCQR_SIM_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace vcqr {

enum class ErrorKind { StdNormal, ScaledChiSq1, ScaledT3 };
enum class SimModel { M1, M2 };
enum class AlternativeKind { Constant, Linear, Quadratic, Sine, Log };
enum class TestKind { RS, LR };
enum class KnotPolicyKind { Fixed, Adaptive };

// Table-style error laws: Z, chi^2_1 / sqrt(2), t_3 / sqrt(3).
double error_scaling(ErrorKind kind);
double sample_error(ErrorKind kind, RngStream& rng);
double error_quantile(ErrorKind kind, double tau);

// sign(z) * min(c, |z|) with z standard normal.
double sample_truncated_normal(double c, RngStream& rng);

struct KnotPolicy {
  KnotPolicyKind kind = KnotPolicyKind::Adaptive;
  std::size_t fixed_count = 3;  // used when kind == Fixed
};

struct SimulationConfig {
  SimModel model = SimModel::M1;
  double tau = 0.5;
  std::size_t n = 200;
  std::size_t replications = 500;
  ErrorKind error = ErrorKind::StdNormal;
  AlternativeKind alternative = AlternativeKind::Constant;
  double amplitude = 1.0;
  double gamma1 = 1.0;
  double gamma2 = 1.0;
  double b = 1.0;
  double gamma3 = 0.5;
  double gamma4 = 0.25;
  double c = 2.0;  // truncation for x
  double alpha = 0.05;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  KnotPolicy knots;
  int degree = 1;
  std::vector<TestKind> tests = {TestKind::RS};
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

// Coefficient function b(t) on t in [0.5, 1.5]: the configured constant plus
// amplitude * {0, (t-1), (t-1)^2, sin(2 pi (t - 0.5)), log t}.
double coefficient_b(const SimulationConfig& config, double t);

// One simulated dataset; deterministic in (config.seed, replicate_index).
std::shared_ptr<const Dataset> generate(const SimulationConfig& config,
                                        std::size_t replicate_index);

struct PowerCell {
  TestKind test = TestKind::RS;
  double rejection_rate = 0.0;
  double mc_se = 0.0;
  std::size_t replications = 0;
  std::size_t failures = 0;
};

struct PowerTable {
  SimulationConfig config;
  std::vector<PowerCell> cells;
};

// Monte Carlo rejection rates: per replicate generate data, resolve the knot
// policy (fixed equispaced knots, or the SIC-minimizing number of uniform
// knots), run the configured tests, and aggregate in replicate order.
// Replicates run concurrently; results are independent of the thread count.
PowerTable run_power_study(const SimulationConfig& config);

// Stable sub-seed for nested randomized procedures (bootstrap) so their
// streams never collide with the replicate generation streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

const char* to_string(ErrorKind kind);
const char* to_string(SimModel model);
const char* to_string(AlternativeKind kind);
const char* to_string(TestKind test);
std::string to_string(const KnotPolicy& policy);

}  // namespace vcqr

#endif  // VCQR_SIM_HPP_
