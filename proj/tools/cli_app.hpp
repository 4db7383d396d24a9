#ifndef VCQR_TOOLS_CLI_APP_HPP_
#define VCQR_TOOLS_CLI_APP_HPP_

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcqr/vcqr.h"

namespace vcqr_cli {

// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& message)
      : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

struct ColumnRoles {
  std::string response;
  std::string index;
  std::vector<std::string> covariates;
  std::vector<std::string> interactions;  // "A*B" products of data columns
};

struct DatasetHandle {
  std::unique_ptr<vcqr_dataset, void (*)(vcqr_dataset*)> handle{
      nullptr, vcqr_dataset_free};
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<std::string> covariate_names;  // intercept excluded
};

// Parse a CSV file (UTF-8, header row, comma separated, '.' decimal) into a
// dataset: intercept column prepended, interaction columns computed as
// element-wise products, index variable mapped to the unit interval
// internally.  Errors name the offending row and column.
DatasetHandle ingest_csv(const std::string& path, const ColumnRoles& roles);

// Write-to-temp plus atomic rename; no partial file survives a failure.
void atomic_write(const std::string& path, const std::string& content);

struct FitRequest {
  std::string input;
  ColumnRoles roles;
  std::vector<double> taus = {0.5};
  int degree = 1;
  bool select = true;                // stepwise selection by default
  std::vector<double> fixed_knots;   // used when select is false
  std::size_t potential_count = 0;   // 0: guideline
  bool equispaced = false;
  std::string out_dir = ".";
  std::size_t grid_points = 201;
  bool emit_curves = true;
  bool emit_trace = true;
  bool emit_summary = true;
};

struct TestRequest {
  std::string input;
  ColumnRoles roles;
  std::vector<double> taus = {0.5};
  int degree = 1;
  bool select = true;
  std::vector<double> fixed_knots;
  std::size_t potential_count = 0;
  bool equispaced = false;
  bool weighted = false;
  int calibration = 2;  // 0 chisq, 1 normal, 2 auto
  bool run_lr = false;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

struct SimulateRequest {
  std::string config_json;  // full config forwarded to the library
  std::string out_path = "power.csv";
};

int run_fit(const FitRequest& request);
int run_test(const TestRequest& request);
int run_simulate(const SimulateRequest& request);

// Entry point used by main(); parses argv, applies config-file defaults and
// the VCQR_SEED override, dispatches the subcommand.
int run_cli(int argc, char** argv);

}  // namespace vcqr_cli

#endif  // VCQR_TOOLS_CLI_APP_HPP_
