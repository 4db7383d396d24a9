#include "serialize.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include <json.hpp>

namespace vcqr {

namespace {

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json knots_to_json(const std::vector<std::vector<double>>& knots) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& per_coef : knots) out.push_back(per_coef);
  return out;
}

nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

std::string curves_csv(const VcqrModel& model, const std::vector<double>& grid,
                       int max_deriv) {
  std::string out = "coefficient,t,value,deriv\n";
  for (std::size_t j = 0; j < model.design().num_coefficients(); ++j) {
    for (int d = 0; d <= max_deriv; ++d) {
      for (double t : grid) {
        out += std::to_string(j);
        out += ',';
        out += full_precision(t);
        out += ',';
        out += full_precision(model.eval_coefficient(j, t, d));
        out += ',';
        out += std::to_string(d);
        out += '\n';
      }
    }
  }
  return out;
}

std::string trace_json(const KnotSelectionTrace& trace) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& entry : trace.visited) {
    arr.push_back({{"knots_per_coefficient", knots_to_json(entry.knots)},
                   {"p_n", entry.p_n},
                   {"objective", entry.objective},
                   {"sic", finite_or_string(entry.sic)}});
  }
  return arr.dump(2) + "\n";
}

std::string fit_summary_json(const VcqrModel& model,
                             const std::vector<std::vector<double>>& knots,
                             double sic_value, std::size_t selected_index,
                             double report_lo, double report_hi) {
  nlohmann::json j{
      {"tau", model.tau()},
      {"n", model.data().n()},
      {"p_n", model.design().width()},
      {"objective", model.fit().objective},
      {"sic", finite_or_string(sic_value)},
      {"knots_per_coefficient", knots_to_json(knots)},
      {"selected_index", selected_index},
      {"rank_deficient", model.fit().rank_deficient},
      {"report_range", {report_lo, report_hi}},
  };
  return j.dump(2) + "\n";
}

std::string rao_report_json(const RaoTestReport& report,
                            const std::vector<std::vector<double>>& knots,
                            std::uint64_t seed) {
  nlohmann::json j{
      {"test", report.weighted ? "rao_weighted" : "rao"},
      {"statistic", report.statistic},
      {"df", report.df},
      {"calibration",
       report.calibration_used == Calibration::ChiSq ? "chisq" : "normal"},
      {"p_value", report.p_value},
      {"p_value_chisq", report.p_value_chisq},
      {"p_value_normal", report.p_value_normal},
      {"standardized", report.standardized},
      {"sigma2", report.sigma2},
      {"n", report.n},
      {"tau", report.tau},
      {"knots", knots_to_json(knots)},
      {"seed", seed},
      {"bootstrap_count", 0},
  };
  return j.dump(2) + "\n";
}

std::string lr_report_json(const LrTestReport& report,
                           const std::vector<std::vector<double>>& knots,
                           std::size_t df) {
  nlohmann::json j{
      {"test", "lr"},
      {"statistic", report.statistic},
      {"df", df},
      {"calibration", "bootstrap"},
      {"p_value", report.p_value},
      {"n", report.n},
      {"tau", report.tau},
      {"knots", knots_to_json(knots)},
      {"seed", report.seed},
      {"bootstrap_count", report.bootstrap_count},
  };
  return j.dump(2) + "\n";
}

std::string power_table_csv(const PowerTable& table) {
  std::string out =
      "model,tau,error_law,alternative,amplitude,test,knot_policy,n,"
      "replications,rejection_rate,mc_se,failures,seed\n";
  char buf[256];
  for (const PowerCell& cell : table.cells) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%g,%s,%s,%g,%s,%s,%zu,%zu,%.6f,%.6g,%zu,%llu\n",
                  to_string(table.config.model), table.config.tau,
                  to_string(table.config.error),
                  to_string(table.config.alternative), table.config.amplitude,
                  to_string(cell.test), to_string(table.config.knots).c_str(),
                  table.config.n, cell.replications, cell.rejection_rate,
                  cell.mc_se, cell.failures,
                  static_cast<unsigned long long>(table.config.seed));
    out += buf;
  }
  return out;
}

}  // namespace vcqr
