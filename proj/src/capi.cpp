#include "vcqr/vcqr.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include <json.hpp>

#include "basis.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "hyptest.hpp"
#include "knotsel.hpp"
#include "serialize.hpp"
#include "sim.hpp"
#include "stats.hpp"
#include "vcm.hpp"

namespace {

thread_local std::string g_last_error;

vcqr_status fail(vcqr_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
vcqr_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return fail(VCQR_ERR_INVALID_ARGUMENT, e.what());
  } catch (const vcqr::DataError& e) {
    return fail(VCQR_ERR_DATA, e.what());
  } catch (const vcqr::NumericError& e) {
    return fail(VCQR_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(VCQR_ERR_UNKNOWN, "out of memory");
  } catch (const std::exception& e) {
    return fail(VCQR_ERR_UNKNOWN, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

struct vcqr_dataset {
  std::shared_ptr<const vcqr::Dataset> data;
};

struct vcqr_fit {
  vcqr::VcqrModel model;
  vcqr::KnotSelectionTrace trace;
  std::vector<std::vector<double>> knots;  // native units, per coefficient
};

namespace {

std::vector<std::vector<double>> parse_knot_sets(const vcqr::Dataset& data,
                                                 const double* knots,
                                                 const size_t* knot_counts,
                                                 size_t n_sets) {
  const std::size_t ncoef = data.p() + 1;
  if (n_sets != 1 && n_sets != ncoef) {
    throw std::invalid_argument(
        "knot sets must be shared (1) or per coefficient (p+1)");
  }
  if (n_sets > 0 && knot_counts == nullptr) {
    throw std::invalid_argument("knot_counts is null");
  }
  std::vector<std::vector<double>> sets;
  std::size_t at = 0;
  for (std::size_t s = 0; s < n_sets; ++s) {
    std::vector<double> one(knot_counts[s]);
    for (std::size_t i = 0; i < knot_counts[s]; ++i) one[i] = knots[at++];
    sets.push_back(std::move(one));
  }
  if (n_sets == 1) sets.assign(ncoef, sets[0]);
  return sets;
}

vcqr::VcDesign design_from_native_knots(
    const vcqr::Dataset& data, int degree,
    const std::vector<std::vector<double>>& knot_sets) {
  std::vector<vcqr::SplineBasis> bases;
  bases.reserve(knot_sets.size());
  for (const auto& native : knot_sets) {
    std::vector<double> unit;
    unit.reserve(native.size());
    for (double k : native) unit.push_back(data.t_map().to_unit(k));
    bases.push_back(vcqr::make_basis(unit, degree, vcqr::BasisKind::BSpline));
  }
  return vcqr::VcDesign(std::move(bases));
}

vcqr::SimulationConfig parse_simulation_config(const std::string& text);

}  // namespace

extern "C" {

const char* vcqr_version(void) { return "0.1.0"; }

const char* vcqr_last_error(void) { return g_last_error.c_str(); }

void vcqr_string_free(char* s) { delete[] s; }

vcqr_status vcqr_dataset_create(size_t n, size_t p, const double* t,
                                const double* x, const double* y,
                                const double* t_domain, vcqr_dataset** out) {
  return guarded([&]() -> vcqr_status {
    if (!t || !x || !y || !out) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer argument");
    }
    std::vector<double> tv(t, t + n);
    Eigen::MatrixXd xm(static_cast<Eigen::Index>(n),
                       static_cast<Eigen::Index>(p + 1));
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j <= p; ++j) {
        xm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            x[i * (p + 1) + j];
      }
    }
    Eigen::VectorXd yv(static_cast<Eigen::Index>(n));
    for (size_t i = 0; i < n; ++i) yv[static_cast<Eigen::Index>(i)] = y[i];

    auto handle = std::make_unique<vcqr_dataset>();
    if (t_domain) {
      handle->data = std::make_shared<vcqr::Dataset>(
          std::move(tv), std::move(xm), std::move(yv),
          vcqr::TMap{t_domain[0], t_domain[1]});
    } else {
      handle->data = std::make_shared<vcqr::Dataset>(std::move(tv),
                                                     std::move(xm),
                                                     std::move(yv));
    }
    *out = handle.release();
    return VCQR_OK;
  });
}

void vcqr_dataset_free(vcqr_dataset* dataset) { delete dataset; }

size_t vcqr_dataset_n(const vcqr_dataset* dataset) {
  return dataset ? dataset->data->n() : 0;
}

size_t vcqr_dataset_p(const vcqr_dataset* dataset) {
  return dataset ? dataset->data->p() : 0;
}

vcqr_status vcqr_fit_fixed(const vcqr_dataset* dataset, double tau, int degree,
                           const double* knots, size_t n_knots,
                           vcqr_fit** out) {
  return guarded([&]() -> vcqr_status {
    if (!dataset || !out || (n_knots > 0 && !knots)) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer argument");
    }
    const auto& data = *dataset->data;
    std::vector<std::vector<double>> sets(
        data.p() + 1, std::vector<double>(knots, knots + n_knots));
    vcqr::VcDesign design = design_from_native_knots(data, degree, sets);
    vcqr::VcqrModel model = vcqr::fit_vcqr(dataset->data, tau, design);

    vcqr::KnotTraceEntry entry;
    entry.knots = sets;
    entry.p_n = design.width();
    entry.objective = model.fit().objective;
    entry.sic = vcqr::sic(entry.objective, entry.p_n, data.n());
    vcqr::KnotSelectionTrace trace;
    trace.visited.push_back(entry);
    trace.selected_index = 0;

    *out = new vcqr_fit{std::move(model), std::move(trace), std::move(sets)};
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_select(const vcqr_dataset* dataset, double tau, int degree,
                            const vcqr_select_options* options,
                            vcqr_fit** out) {
  return guarded([&]() -> vcqr_status {
    if (!dataset || !out) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer argument");
    }
    vcqr::KnotSelectionConfig config;
    config.degree = degree;
    if (options) {
      config.potential_count = options->potential_count;
      config.equispaced = options->equispaced != 0;
      if (options->max_iterations > 0) {
        config.max_iterations = options->max_iterations;
      }
      if (options->add_level > 0.0) config.add_level = options->add_level;
      if (options->delete_level > 0.0) {
        config.delete_level = options->delete_level;
      }
    }
    vcqr::KnotSelectionResult result =
        vcqr::stepwise_select(dataset->data, tau, config);
    std::vector<std::vector<double>> knots =
        result.trace.visited[result.trace.selected_index].knots;
    *out = new vcqr_fit{std::move(result.model), std::move(result.trace),
                        std::move(knots)};
    return VCQR_OK;
  });
}

void vcqr_fit_free(vcqr_fit* fit) { delete fit; }

size_t vcqr_fit_num_coefficients(const vcqr_fit* fit) {
  return fit ? fit->model.design().num_coefficients() : 0;
}

vcqr_status vcqr_fit_eval(const vcqr_fit* fit, size_t coefficient, double t,
                          int deriv, double* out) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !out) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    *out = fit->model.eval_coefficient(coefficient, t, deriv);
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_predict(const vcqr_fit* fit, double t, const double* x,
                             size_t len, double* out) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !x || !out) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    Eigen::VectorXd xv(static_cast<Eigen::Index>(len));
    for (size_t i = 0; i < len; ++i) xv[static_cast<Eigen::Index>(i)] = x[i];
    *out = fit->model.predict(t, xv);
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_objective(const vcqr_fit* fit, double* out) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !out) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    *out = fit->model.fit().objective;
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_knots(const vcqr_fit* fit, size_t coefficient, double* out,
                           size_t* count) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !count) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    if (coefficient >= fit->knots.size()) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "coefficient index out of range");
    }
    const auto& knots = fit->knots[coefficient];
    if (out) {
      if (*count < knots.size()) {
        return fail(VCQR_ERR_INVALID_ARGUMENT, "knot buffer too small");
      }
      std::copy(knots.begin(), knots.end(), out);
    }
    *count = knots.size();
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_t_range(const vcqr_fit* fit, double* lo, double* hi) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !lo || !hi) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    *lo = fit->model.t_map().lo;
    *hi = fit->model.t_map().hi;
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_report_range(const vcqr_fit* fit, double* lo, double* hi) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !lo || !hi) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    *lo = fit->model.data().t_quantile(0.05);
    *hi = fit->model.data().t_quantile(0.95);
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_curves_csv(const vcqr_fit* fit, double lo, double hi,
                                size_t points, int max_deriv, char** out) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !out) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    if (points < 2 || !(lo < hi)) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "invalid curve grid");
    }
    std::vector<double> grid(points);
    for (size_t i = 0; i < points; ++i) {
      grid[i] = lo + (hi - lo) * static_cast<double>(i) /
                         static_cast<double>(points - 1);
    }
    *out = copy_string(vcqr::curves_csv(fit->model, grid, max_deriv));
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_trace_json(const vcqr_fit* fit, char** out) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !out) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    *out = copy_string(vcqr::trace_json(fit->trace));
    return VCQR_OK;
  });
}

vcqr_status vcqr_fit_summary_json(const vcqr_fit* fit, char** out) {
  return guarded([&]() -> vcqr_status {
    if (!fit || !out) return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    const auto& entry = fit->trace.visited[fit->trace.selected_index];
    *out = copy_string(vcqr::fit_summary_json(
        fit->model, fit->knots, entry.sic, fit->trace.selected_index,
        fit->model.data().t_quantile(0.05), fit->model.data().t_quantile(0.95)));
    return VCQR_OK;
  });
}

vcqr_status vcqr_rao_test(const vcqr_dataset* dataset, double tau, int degree,
                          const double* knots, const size_t* knot_counts,
                          size_t n_sets, int calibration, int weighted,
                          vcqr_rao_result* result, char** report_json) {
  return guarded([&]() -> vcqr_status {
    if (!dataset || !result) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    }
    const auto& data = *dataset->data;
    const auto sets = parse_knot_sets(data, knots, knot_counts, n_sets);
    const vcqr::VcDesign design = design_from_native_knots(data, degree, sets);

    std::optional<vcqr::Calibration> cal;
    if (calibration == 0) cal = vcqr::Calibration::ChiSq;
    else if (calibration == 1) cal = vcqr::Calibration::Normal;
    else if (calibration != 2) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "calibration must be 0, 1 or 2");
    }

    bool floored = false;
    vcqr::RaoTestReport report;
    if (weighted) {
      const vcqr::ScaleModel scale = vcqr::estimate_scale(data);
      floored = scale.floor_applied;
      report = vcqr::rao_score_test_weighted(data, tau, design, scale, cal);
    } else {
      report = vcqr::rao_score_test(data, tau, design, cal);
    }

    result->statistic = report.statistic;
    result->df = report.df;
    result->p_value = report.p_value;
    result->p_value_chisq = report.p_value_chisq;
    result->p_value_normal = report.p_value_normal;
    result->standardized = report.standardized;
    result->calibration_used =
        report.calibration_used == vcqr::Calibration::ChiSq ? 0 : 1;
    result->weighted = weighted ? 1 : 0;
    result->scale_floored = floored ? 1 : 0;
    if (report_json) {
      *report_json = copy_string(vcqr::rao_report_json(report, sets, 0));
    }
    return VCQR_OK;
  });
}

vcqr_status vcqr_lr_test(const vcqr_dataset* dataset, double tau, int degree,
                         const double* knots, const size_t* knot_counts,
                         size_t n_sets, size_t bootstrap_count, uint64_t seed,
                         vcqr_lr_result* result, char** report_json) {
  return guarded([&]() -> vcqr_status {
    if (!dataset || !result) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    }
    const auto& data = *dataset->data;
    const auto sets = parse_knot_sets(data, knots, knot_counts, n_sets);
    const vcqr::VcDesign design = design_from_native_knots(data, degree, sets);
    const vcqr::LrTestReport report =
        vcqr::lr_test(data, tau, design, bootstrap_count, seed);
    result->statistic = report.statistic;
    result->p_value = report.p_value;
    result->bootstrap_count = report.bootstrap_count;
    if (report_json) {
      *report_json = copy_string(vcqr::lr_report_json(
          report, sets, design.width() - (data.p() + 1)));
    }
    return VCQR_OK;
  });
}

vcqr_status vcqr_power_study_csv(const char* config_json, char** out_csv) {
  return guarded([&]() -> vcqr_status {
    if (!config_json || !out_csv) {
      return fail(VCQR_ERR_INVALID_ARGUMENT, "null pointer");
    }
    const vcqr::SimulationConfig config =
        parse_simulation_config(config_json);
    const vcqr::PowerTable table = vcqr::run_power_study(config);
    *out_csv = copy_string(vcqr::power_table_csv(table));
    return VCQR_OK;
  });
}

}  // extern "C"

namespace {

vcqr::SimulationConfig parse_simulation_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: expected an object");

  vcqr::SimulationConfig config;
  static const std::vector<std::string> known = {
      "model", "tau", "n", "replications", "error", "alternative",
      "amplitude", "gamma1", "gamma2", "b", "gamma3", "gamma4", "c",
      "alpha", "bootstrap", "seed", "knots", "degree", "tests", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw std::invalid_argument("config: unknown key '" + it.key() + "'");
    }
  }

  auto str = [&](const char* key) { return j.at(key).get<std::string>(); };
  if (j.contains("model")) {
    const std::string m = str("model");
    if (m == "M1") config.model = vcqr::SimModel::M1;
    else if (m == "M2") config.model = vcqr::SimModel::M2;
    else throw std::invalid_argument("config: model must be M1 or M2");
  }
  if (j.contains("tau")) config.tau = j.at("tau").get<double>();
  if (j.contains("n")) config.n = j.at("n").get<std::size_t>();
  if (j.contains("replications")) {
    config.replications = j.at("replications").get<std::size_t>();
  }
  if (j.contains("error")) {
    const std::string e = str("error");
    if (e == "normal") config.error = vcqr::ErrorKind::StdNormal;
    else if (e == "chisq1") config.error = vcqr::ErrorKind::ScaledChiSq1;
    else if (e == "t3") config.error = vcqr::ErrorKind::ScaledT3;
    else throw std::invalid_argument("config: error must be normal|chisq1|t3");
  }
  if (j.contains("alternative")) {
    const std::string a = str("alternative");
    if (a == "constant") config.alternative = vcqr::AlternativeKind::Constant;
    else if (a == "linear") config.alternative = vcqr::AlternativeKind::Linear;
    else if (a == "quadratic") {
      config.alternative = vcqr::AlternativeKind::Quadratic;
    } else if (a == "sine") config.alternative = vcqr::AlternativeKind::Sine;
    else if (a == "log") config.alternative = vcqr::AlternativeKind::Log;
    else {
      throw std::invalid_argument(
          "config: alternative must be constant|linear|quadratic|sine|log");
    }
  }
  if (j.contains("amplitude")) config.amplitude = j.at("amplitude").get<double>();
  if (j.contains("gamma1")) config.gamma1 = j.at("gamma1").get<double>();
  if (j.contains("gamma2")) config.gamma2 = j.at("gamma2").get<double>();
  if (j.contains("b")) config.b = j.at("b").get<double>();
  if (j.contains("gamma3")) config.gamma3 = j.at("gamma3").get<double>();
  if (j.contains("gamma4")) config.gamma4 = j.at("gamma4").get<double>();
  if (j.contains("c")) config.c = j.at("c").get<double>();
  if (j.contains("alpha")) config.alpha = j.at("alpha").get<double>();
  if (j.contains("bootstrap")) {
    config.bootstrap = j.at("bootstrap").get<std::size_t>();
  }
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("degree")) config.degree = j.at("degree").get<int>();
  if (j.contains("threads")) config.threads = j.at("threads").get<unsigned>();
  if (j.contains("knots")) {
    const auto& k = j.at("knots");
    if (!k.is_object() || !k.contains("policy")) {
      throw std::invalid_argument("config: knots must be {policy, [k]}");
    }
    const std::string policy = k.at("policy").get<std::string>();
    if (policy == "adaptive") {
      config.knots.kind = vcqr::KnotPolicyKind::Adaptive;
    } else if (policy == "fixed") {
      config.knots.kind = vcqr::KnotPolicyKind::Fixed;
      config.knots.fixed_count = k.at("k").get<std::size_t>();
    } else {
      throw std::invalid_argument("config: knot policy must be fixed|adaptive");
    }
  }
  if (j.contains("tests")) {
    config.tests.clear();
    for (const auto& t : j.at("tests")) {
      const std::string name = t.get<std::string>();
      if (name == "RS") config.tests.push_back(vcqr::TestKind::RS);
      else if (name == "LR") config.tests.push_back(vcqr::TestKind::LR);
      else throw std::invalid_argument("config: tests entries must be RS|LR");
    }
  }
  config.validate();
  return config;
}

}  // namespace
