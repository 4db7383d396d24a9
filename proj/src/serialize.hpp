#ifndef VCQR_SERIALIZE_HPP_
#define VCQR_SERIALIZE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "hyptest.hpp"
#include "knotsel.hpp"
#include "sim.hpp"
#include "vcm.hpp"

namespace vcqr {

// Fixed output schemas.  Doubles in the curves CSV are printed with full
// precision so a re-read reproduces evaluation results exactly.

std::string curves_csv(const VcqrModel& model, const std::vector<double>& grid,
                       int max_deriv);

std::string trace_json(const KnotSelectionTrace& trace);

std::string fit_summary_json(const VcqrModel& model,
                             const std::vector<std::vector<double>>& knots,
                             double sic_value, std::size_t selected_index,
                             double report_lo, double report_hi);

std::string rao_report_json(const RaoTestReport& report,
                            const std::vector<std::vector<double>>& knots,
                            std::uint64_t seed);

std::string lr_report_json(const LrTestReport& report,
                           const std::vector<std::vector<double>>& knots,
                           std::size_t df);

std::string power_table_csv(const PowerTable& table);

}  // namespace vcqr

#endif  // VCQR_SERIALIZE_HPP_
