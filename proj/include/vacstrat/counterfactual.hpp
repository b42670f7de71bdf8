#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vacstrat/date.hpp"
#include "vacstrat/ingest.hpp"
#include "vacstrat/panel.hpp"

namespace vacstrat::cf {

struct CfSchedule {
  std::vector<Date> dates;
  std::vector<double> v1;  // hypothetical
  std::vector<double> v2;
  std::vector<double> observed_v1;
  std::vector<double> observed_v2;
  std::optional<std::size_t> divergence;  // first index differing by more than 1e-9
  int early_second_dose_days = 0;
  std::vector<std::string> warnings;
};

// Reallocates each day's observed dose flow: due second doses first (cohorts
// first-dosed at least interval_weeks*7 days earlier), then first doses up to
// max(v1_cap, observed V1), then early second doses if anything is left.
// Throws InputError on missing values or decreasing observed totals.
CfSchedule make_schedule(std::span<const Date> dates, std::span<const double> v1, std::span<const double> v2,
                         int interval_weeks, double v1_cap);
// V* = V.
CfSchedule observed_schedule(std::span<const Date> dates, std::span<const double> v1, std::span<const double> v2);

struct Scenario {
  std::string country;
  int interval_weeks = 8;
  double v1_cap = 100.0;
  int draws = 200;
  std::uint64_t seed = 20210708;
  bool point_estimates = false;  // one replication at the estimated coefficients
  double population_millions = 1.0;  // level outputs are per million when 1
  std::optional<CfSchedule> schedule;  // overrides make_schedule when set

  void validate() const;
};

struct CfDay {
  Date date;
  double observed = 0.0;  // observed log 7-day count
  double mean = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  double delta = 0.0;     // mean - observed
  double observed_level = 0.0;  // observed daily count
  double cf_level = 0.0;        // counterfactual daily count
};

struct CounterfactualResult {
  std::string country;
  panel::Outcome outcome = panel::Outcome::Cases;
  std::vector<CfDay> days;
  int draws = 0;
  std::optional<Date> divergence;
  int observed_fallback_rows = 0;  // days without a residual that kept observed values
  std::vector<std::string> warnings;
};

// Iterates the outcome equation and the mobility equation forward under the
// scenario schedule. Outcome-equation slopes are drawn from their estimated
// normal distribution; fixed effects, trends and the mobility equation stay
// at point estimates. Residuals are recomputed per draw on observed data.
CounterfactualResult simulate_paths(const panel::PanelFit& outcome_fit, const panel::PanelFit& mobility_fit,
                                    const ObservationPanel& panel, const Scenario& scenario, int jobs = 1);
// Deaths equation with the death-information mobility equation.
CounterfactualResult death_paths(const panel::PanelFit& death_fit, const panel::PanelFit& mobility_fit,
                                 const ObservationPanel& panel, const Scenario& scenario, int jobs = 1);

struct SummaryRow {
  std::string label;
  DateRange window;
  int days = 0;
  double average_delta = 0.0;     // per day, counterfactual minus observed level
  double cumulative_delta = 0.0;
  double percent_change = 0.0;    // 100 * cumulative delta / observed total
};

// One row per sub-window plus a final "full" row over the whole result.
std::vector<SummaryRow> summarize(const CounterfactualResult& result, std::span<const DateRange> windows);

void write_result_csv(const CounterfactualResult& result, std::ostream& out);
void write_schedule_csv(const CfSchedule& schedule, std::ostream& out);
nlohmann::json to_json(const std::vector<SummaryRow>& rows);
// Observed and counterfactual daily levels with the band, as a standalone SVG.
void write_svg(const CounterfactualResult& result, std::ostream& out);

}  // namespace vacstrat::cf
