#include "cli_app.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace vcqr_cli {

namespace {

using StringPtr = std::unique_ptr<char, void (*)(char*)>;

StringPtr own(char* s) { return StringPtr(s, vcqr_string_free); }

[[noreturn]] void raise_capi(vcqr_status status) {
  const std::string message = vcqr_last_error();
  switch (status) {
    case VCQR_ERR_INVALID_ARGUMENT:
      throw CliError(kConfigError, message);
    case VCQR_ERR_DATA:
      throw CliError(kDataError, message);
    default:
      throw CliError(kNumericError, message);
  }
}

void check(vcqr_status status) {
  if (status != VCQR_OK) raise_capi(status);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& column) {
  const std::string value = trim(cell);
  char* end = nullptr;
  const double parsed = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw CliError(kDataError, "non-numeric cell at row " +
                                   std::to_string(row) + ", column '" +
                                   column + "'");
  }
  return parsed;
}

std::string format_tau(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", tau);
  return buf;
}

struct FitPtr {
  std::unique_ptr<vcqr_fit, void (*)(vcqr_fit*)> ptr{nullptr, vcqr_fit_free};
};

FitPtr make_fit(const DatasetHandle& data, double tau, int degree, bool select,
                const std::vector<double>& fixed_knots,
                std::size_t potential_count, bool equispaced) {
  FitPtr fit;
  vcqr_fit* raw = nullptr;
  if (select) {
    vcqr_select_options options{};
    options.potential_count = potential_count;
    options.equispaced = equispaced ? 1 : 0;
    check(vcqr_fit_select(data.handle.get(), tau, degree, &options, &raw));
  } else {
    check(vcqr_fit_fixed(data.handle.get(), tau, degree, fixed_knots.data(),
                         fixed_knots.size(), &raw));
  }
  fit.ptr.reset(raw);
  return fit;
}

// Per-coefficient knot sets of a fit, flattened for the test entry points.
void flatten_knots(const vcqr_fit* fit, std::vector<double>& knots,
                   std::vector<size_t>& counts) {
  const std::size_t ncoef = vcqr_fit_num_coefficients(fit);
  knots.clear();
  counts.resize(ncoef);
  for (std::size_t j = 0; j < ncoef; ++j) {
    std::size_t count = 0;
    check(vcqr_fit_knots(fit, j, nullptr, &count));
    std::vector<double> buffer(count);
    if (count > 0) check(vcqr_fit_knots(fit, j, buffer.data(), &count));
    counts[j] = count;
    knots.insert(knots.end(), buffer.begin(), buffer.end());
  }
}

}  // namespace

DatasetHandle ingest_csv(const std::string& path, const ColumnRoles& roles) {
  std::ifstream file(path);
  if (!file) throw CliError(kDataError, "cannot open input file: " + path);

  std::string line;
  if (!std::getline(file, line)) {
    throw CliError(kDataError, "empty input file: " + path);
  }
  const std::vector<std::string> header = split(line, ',');

  auto column_of = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw CliError(kConfigError, "column '" + name + "' not in the header");
  };

  if (roles.response.empty() || roles.index.empty()) {
    throw CliError(kConfigError, "response and index columns are required");
  }
  const std::size_t response_col = column_of(roles.response);
  const std::size_t index_col = column_of(roles.index);
  std::vector<std::size_t> covariate_cols;
  for (const auto& name : roles.covariates) {
    covariate_cols.push_back(column_of(name));
  }
  struct Interaction {
    std::string name;
    std::size_t left;
    std::size_t right;
  };
  std::vector<Interaction> interactions;
  for (const auto& spec : roles.interactions) {
    const auto star = spec.find('*');
    if (star == std::string::npos || star == 0 || star + 1 == spec.size()) {
      throw CliError(kConfigError,
                     "interaction '" + spec + "' must look like A*B");
    }
    const std::string left = trim(spec.substr(0, star));
    const std::string right = trim(spec.substr(star + 1));
    interactions.push_back({left + "*" + right, column_of(left),
                            column_of(right)});
  }

  std::vector<double> t, y, x_flat;
  const std::size_t p = covariate_cols.size() + interactions.size();
  std::size_t row = 0;
  while (std::getline(file, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != header.size()) {
      throw CliError(kDataError, "row " + std::to_string(row) + " has " +
                                     std::to_string(cells.size()) +
                                     " fields, expected " +
                                     std::to_string(header.size()));
    }
    auto cell = [&](std::size_t col) {
      return parse_cell(cells[col], row, header[col]);
    };
    t.push_back(cell(index_col));
    y.push_back(cell(response_col));
    x_flat.push_back(1.0);
    for (std::size_t col : covariate_cols) x_flat.push_back(cell(col));
    for (const auto& inter : interactions) {
      x_flat.push_back(cell(inter.left) * cell(inter.right));
    }
  }
  if (t.size() < 10) {
    throw CliError(kDataError, "need at least 10 rows, found " +
                                   std::to_string(t.size()));
  }

  DatasetHandle out;
  out.n = t.size();
  out.p = p;
  for (const auto& name : roles.covariates) out.covariate_names.push_back(name);
  for (const auto& inter : interactions) out.covariate_names.push_back(inter.name);

  vcqr_dataset* raw = nullptr;
  check(vcqr_dataset_create(out.n, p, t.data(), x_flat.data(), y.data(),
                            nullptr, &raw));
  out.handle.reset(raw);
  return out;
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path temp = target.string() + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream file(temp, std::ios::binary | std::ios::trunc);
    if (!file) {
      throw CliError(kDataError, "cannot write to " + temp.string());
    }
    file << content;
    file.flush();
    if (!file) {
      std::error_code ec;
      fs::remove(temp, ec);
      throw CliError(kDataError, "failed writing " + temp.string());
    }
  }
  std::error_code ec;
  fs::rename(temp, target, ec);
  if (ec) {
    fs::remove(temp, ec);
    throw CliError(kDataError, "cannot move output into place: " + path);
  }
}

int run_fit(const FitRequest& request) {
  const DatasetHandle data = ingest_csv(request.input, request.roles);
  for (double tau : request.taus) {
    const FitPtr fit =
        make_fit(data, tau, request.degree, request.select, request.fixed_knots,
                 request.potential_count, request.equispaced);
    const std::string suffix = "_tau" + format_tau(tau);
    if (request.emit_curves) {
      double lo = 0.0, hi = 0.0;
      check(vcqr_fit_report_range(fit.ptr.get(), &lo, &hi));
      char* csv = nullptr;
      check(vcqr_fit_curves_csv(fit.ptr.get(), lo, hi, request.grid_points,
                                request.degree >= 1 ? 1 : 0, &csv));
      atomic_write(request.out_dir + "/curves" + suffix + ".csv",
                   own(csv).get());
    }
    if (request.emit_trace) {
      char* json = nullptr;
      check(vcqr_fit_trace_json(fit.ptr.get(), &json));
      atomic_write(request.out_dir + "/trace" + suffix + ".json",
                   own(json).get());
    }
    if (request.emit_summary) {
      char* json = nullptr;
      check(vcqr_fit_summary_json(fit.ptr.get(), &json));
      atomic_write(request.out_dir + "/summary" + suffix + ".json",
                   own(json).get());
    }
  }
  return kOk;
}

int run_test(const TestRequest& request) {
  if (request.run_lr && request.bootstrap < 1) {
    throw CliError(kConfigError, "LR test requires a positive bootstrap count");
  }
  const DatasetHandle data = ingest_csv(request.input, request.roles);
  for (double tau : request.taus) {
    std::vector<double> knots;
    std::vector<size_t> counts;
    if (request.select) {
      const FitPtr fit =
          make_fit(data, tau, request.degree, true, {},
                   request.potential_count, request.equispaced);
      flatten_knots(fit.ptr.get(), knots, counts);
    } else {
      knots = request.fixed_knots;
      counts = {knots.size()};
    }
    const std::string suffix = "_tau" + format_tau(tau);

    vcqr_rao_result rao{};
    char* rao_json = nullptr;
    check(vcqr_rao_test(data.handle.get(), tau, request.degree, knots.data(),
                        counts.data(), counts.size(), request.calibration,
                        request.weighted ? 1 : 0, &rao, &rao_json));
    atomic_write(request.out_dir + "/rao" + suffix + ".json",
                 own(rao_json).get());

    if (request.run_lr) {
      vcqr_lr_result lr{};
      char* lr_json = nullptr;
      check(vcqr_lr_test(data.handle.get(), tau, request.degree, knots.data(),
                         counts.data(), counts.size(), request.bootstrap,
                         request.seed, &lr, &lr_json));
      atomic_write(request.out_dir + "/lr" + suffix + ".json",
                   own(lr_json).get());
    }
  }
  return kOk;
}

int run_simulate(const SimulateRequest& request) {
  char* csv = nullptr;
  check(vcqr_power_study_csv(request.config_json.c_str(), &csv));
  atomic_write(request.out_path, own(csv).get());
  return kOk;
}

namespace {

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  for (const std::string& item : split(text, ',')) {
    if (item.empty()) continue;
    char* end = nullptr;
    const double value = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size()) {
      throw CliError(kConfigError, "cannot parse number '" + item + "'");
    }
    out.push_back(value);
  }
  return out;
}

nlohmann::json load_config_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw CliError(kConfigError, "cannot open config file: " + path);
  try {
    return nlohmann::json::parse(file);
  } catch (const nlohmann::json::parse_error& e) {
    throw CliError(kConfigError, std::string("config file: ") + e.what());
  }
}

// Shared data/knot flags for fit and test.
struct CommonFlags {
  std::string input;
  std::string response;
  std::string index;
  std::string covariates;
  std::string interactions;
  std::string taus = "0.5";
  int degree = 1;
  std::string knots;
  bool select = false;
  std::size_t potential = 0;
  bool equispaced = false;
  std::string config_path;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--input", flags.input, "Input CSV (header row)");
  cmd->add_option("--response", flags.response, "Response column");
  cmd->add_option("--index", flags.index, "Index-variable column (t)");
  cmd->add_option("--covariates", flags.covariates,
                  "Comma-separated covariate columns");
  cmd->add_option("--interactions", flags.interactions,
                  "Comma-separated interaction specs, e.g. H*S");
  cmd->add_option("--tau", flags.taus, "Quantile level(s), comma separated");
  cmd->add_option("--degree", flags.degree, "Spline degree (default 1)");
  cmd->add_option("--knots", flags.knots,
                  "Fixed interior knots in t units, comma separated");
  cmd->add_flag("--select", flags.select,
                "Stepwise knot selection (default unless --knots given)");
  cmd->add_option("--potential-knots", flags.potential,
                  "Candidate knot count for selection (0: guideline)");
  cmd->add_flag("--equispaced", flags.equispaced,
                "Place candidate knots equispaced instead of at quantiles");
  cmd->add_option("--config", flags.config_path,
                  "JSON config file; explicit flags override it");
}

void apply_common_config(const nlohmann::json& j, CLI::App* cmd,
                         CommonFlags& flags) {
  auto set_if_unset = [&](const char* flag, auto& target) {
    using T = std::decay_t<decltype(target)>;
    if (cmd->count(flag) == 0 && j.contains(flag + 2)) {
      target = j.at(flag + 2).get<T>();
    }
  };
  set_if_unset("--input", flags.input);
  set_if_unset("--response", flags.response);
  set_if_unset("--index", flags.index);
  set_if_unset("--covariates", flags.covariates);
  set_if_unset("--interactions", flags.interactions);
  set_if_unset("--tau", flags.taus);
  set_if_unset("--degree", flags.degree);
  set_if_unset("--knots", flags.knots);
  set_if_unset("--potential-knots", flags.potential);
  if (cmd->count("--select") == 0 && j.contains("select")) {
    flags.select = j.at("select").get<bool>();
  }
  if (cmd->count("--equispaced") == 0 && j.contains("equispaced")) {
    flags.equispaced = j.at("equispaced").get<bool>();
  }
}

ColumnRoles roles_from(const CommonFlags& flags) {
  ColumnRoles roles;
  roles.response = flags.response;
  roles.index = flags.index;
  for (const auto& name : split(flags.covariates, ',')) {
    if (!name.empty()) roles.covariates.push_back(name);
  }
  for (const auto& spec : split(flags.interactions, ',')) {
    if (!spec.empty()) roles.interactions.push_back(spec);
  }
  return roles;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Varying-coefficient quantile regression"};
  app.require_subcommand(1);

  CommonFlags fit_flags;
  std::string fit_out_dir = ".";
  std::size_t grid_points = 201;
  bool no_curves = false, no_trace = false, no_summary = false;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit coefficient curves");
  add_common_flags(fit_cmd, fit_flags);
  fit_cmd->add_option("--out-dir", fit_out_dir, "Output directory");
  fit_cmd->add_option("--grid-points", grid_points, "Curve grid size");
  fit_cmd->add_flag("--no-curves", no_curves, "Skip the curves CSV");
  fit_cmd->add_flag("--no-trace", no_trace, "Skip the trace JSON");
  fit_cmd->add_flag("--no-summary", no_summary, "Skip the summary JSON");

  CommonFlags test_flags;
  std::string test_out_dir = ".";
  bool weighted = false, run_lr = false;
  std::string calibration = "auto";
  std::size_t bootstrap = 200;
  std::uint64_t seed = 0;
  CLI::App* test_cmd =
      app.add_subcommand("test", "Test constancy of the coefficients");
  add_common_flags(test_cmd, test_flags);
  test_cmd->add_option("--out-dir", test_out_dir, "Output directory");
  test_cmd->add_flag("--weighted", weighted,
                     "Rescale by an estimated linear scale model");
  test_cmd->add_option("--calibration", calibration, "chisq | normal | auto");
  test_cmd->add_flag("--lr", run_lr, "Also run the bootstrap LR test");
  test_cmd->add_option("--bootstrap", bootstrap, "LR bootstrap replicates");
  test_cmd->add_option("--seed", seed, "Bootstrap seed");

  std::string sim_config_path, sim_out = "power.csv";
  std::vector<std::string> sim_overrides;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo power study");
  sim_cmd->add_option("--config", sim_config_path, "Simulation config JSON");
  sim_cmd->add_option("--out", sim_out, "Output CSV path");
  sim_cmd->add_option("--set", sim_overrides,
                      "Config override key=value (repeatable)");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? kOk : kConfigError;
    }

    if (fit_cmd->parsed()) {
      if (!fit_flags.config_path.empty()) {
        apply_common_config(load_config_file(fit_flags.config_path), fit_cmd,
                            fit_flags);
      }
      FitRequest request;
      request.input = fit_flags.input;
      request.roles = roles_from(fit_flags);
      request.taus = parse_double_list(fit_flags.taus);
      request.degree = fit_flags.degree;
      request.fixed_knots = parse_double_list(fit_flags.knots);
      request.select = fit_flags.select || request.fixed_knots.empty();
      request.potential_count = fit_flags.potential;
      request.equispaced = fit_flags.equispaced;
      request.out_dir = fit_out_dir;
      request.grid_points = grid_points;
      request.emit_curves = !no_curves;
      request.emit_trace = !no_trace;
      request.emit_summary = !no_summary;
      if (request.taus.empty()) {
        throw CliError(kConfigError, "at least one tau is required");
      }
      if (request.input.empty()) {
        throw CliError(kConfigError, "--input is required");
      }
      return run_fit(request);
    }

    if (test_cmd->parsed()) {
      if (!test_flags.config_path.empty()) {
        apply_common_config(load_config_file(test_flags.config_path), test_cmd,
                            test_flags);
      }
      TestRequest request;
      request.input = test_flags.input;
      request.roles = roles_from(test_flags);
      request.taus = parse_double_list(test_flags.taus);
      request.degree = test_flags.degree;
      request.fixed_knots = parse_double_list(test_flags.knots);
      request.select = test_flags.select || request.fixed_knots.empty();
      request.potential_count = test_flags.potential;
      request.equispaced = test_flags.equispaced;
      request.weighted = weighted;
      if (calibration == "chisq") request.calibration = 0;
      else if (calibration == "normal") request.calibration = 1;
      else if (calibration == "auto") request.calibration = 2;
      else throw CliError(kConfigError, "calibration must be chisq|normal|auto");
      request.run_lr = run_lr;
      request.bootstrap = bootstrap;
      request.seed = seed;
      request.out_dir = test_out_dir;
      if (const char* env_seed = std::getenv("VCQR_SEED")) {
        request.seed = std::strtoull(env_seed, nullptr, 10);
      }
      if (request.input.empty()) {
        throw CliError(kConfigError, "--input is required");
      }
      return run_test(request);
    }

    // simulate
    nlohmann::json config = nlohmann::json::object();
    if (!sim_config_path.empty()) config = load_config_file(sim_config_path);
    for (const std::string& override_spec : sim_overrides) {
      const auto eq = override_spec.find('=');
      if (eq == std::string::npos) {
        throw CliError(kConfigError,
                       "--set expects key=value, got '" + override_spec + "'");
      }
      const std::string key = override_spec.substr(0, eq);
      const std::string value = override_spec.substr(eq + 1);
      try {
        config[key] = nlohmann::json::parse(value);
      } catch (const nlohmann::json::parse_error&) {
        config[key] = value;  // bare string
      }
    }
    if (const char* env_seed = std::getenv("VCQR_SEED")) {
      config["seed"] = std::strtoull(env_seed, nullptr, 10);
    }
    SimulateRequest request;
    request.config_json = config.dump();
    request.out_path = sim_out;
    return run_simulate(request);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericError;
  }
}

}  // namespace vcqr_cli
