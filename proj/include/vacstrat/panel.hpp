#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vacstrat/date.hpp"
#include "vacstrat/ingest.hpp"

namespace vacstrat::panel {

enum class Outcome { Cases, Deaths, Mobility };
enum class InfoVariable { Cases, Deaths };
enum class ChineseSet { Baseline, Extended };

std::string_view to_string(Outcome o);
std::string_view to_string(InfoVariable v);
std::string_view to_string(ChineseSet s);
Outcome parse_outcome(std::string_view text);
InfoVariable parse_info(std::string_view text);
ChineseSet parse_chinese_set(std::string_view text);
// "none" | "linear" | "quadratic" | "cubic" -> 0..3
int parse_trend(std::string_view text);
std::string_view trend_name(int degree);

struct PanelSpec {
  Outcome outcome = Outcome::Cases;
  int trend = 0;  // degree of the country-specific polynomial trend
  bool chinese_terms = false;
  ChineseSet chinese_set = ChineseSet::Baseline;
  int lag_shift = 0;  // days added to both vaccine lags
  std::optional<DateRange> window;  // whole panel when unset
  Frequency frequency = Frequency::Daily;
  bool interactions = false;
  std::optional<InfoVariable> info;  // mobility outcome only; cases when unset

  void validate() const;
  InfoVariable info_variable() const { return info.value_or(InfoVariable::Cases); }
  // Short label used in battery tables, e.g. "cases/quadratic/chn".
  std::string label() const;
};

nlohmann::json to_json(const PanelSpec& spec);
PanelSpec spec_from_json(const nlohmann::json& j);

// Per-country series the regressors are built from, indexed like the panel
// dates. LC, LD and LT are logs of 7-day counts (log of the weekly flow in a
// weekly panel), missing when the count is not positive.
enum class Series { V1, V2, P, M, LC, LD, LT };
inline constexpr std::size_t kNumSeries = 7;

struct SeriesBank {
  std::array<std::vector<double>, kNumSeries> data;
  double chinese = 0.0;  // vaccine dummy D_i under the active set

  std::vector<double>& operator[](Series s) { return data[static_cast<std::size_t>(s)]; }
  const std::vector<double>& operator[](Series s) const { return data[static_cast<std::size_t>(s)]; }
};

SeriesBank make_bank(const ObservationPanel& panel, std::size_t country, ChineseSet set);

// One regressor: a lagged level, a 7-day difference of a lagged level, or a
// product of two lagged levels, optionally multiplied by the Chinese dummy.
struct Term {
  enum class Kind { Level, Diff, Product };
  std::string name;
  Kind kind = Kind::Level;
  Series a = Series::V1;
  int lag_a = 0;  // days
  Series b = Series::V1;
  int lag_b = 0;
  bool chinese = false;
};

// Terms of the regression equation for `spec`, in coefficient order.
std::vector<Term> equation_terms(const PanelSpec& spec);
// Series holding the outcome's log 7-day count (LC or LD); M for mobility.
Series outcome_series(Outcome outcome);

// Value of `term` at date index t, or missing when any input is missing or
// dated before `earliest`. `step` is the panel spacing in days.
double evaluate(const Term& term, const SeriesBank& bank, std::size_t t, std::size_t earliest, int step);
// Outcome value at t: log-count growth over 7 days, or M_t for mobility.
double evaluate_outcome(Outcome outcome, const SeriesBank& bank, std::size_t t, std::size_t earliest, int step);

struct CountryDrops {
  int rows = 0;            // candidate dates in the window
  int nonpositive = 0;     // dropped because a 7-day count was not positive
  int missing = 0;         // dropped because an input was missing or out of window
  int usable = 0;
};

struct PanelDesign {
  PanelSpec spec;
  DateRange window;
  std::vector<std::string> names;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  std::vector<std::size_t> cluster;  // index into `countries` per row
  std::vector<std::string> countries;
  std::vector<Date> dates;          // per row
  std::vector<double> tau;          // per row, rescaled time in [0, 1]
  std::map<std::string, CountryDrops> drops;

  int n_rows() const { return static_cast<int>(y.size()); }
  // Number of trend columns (excluding the country intercepts).
  int trend_columns() const { return spec.trend * static_cast<int>(countries.size()); }
};

// Throws BuildError for an invalid spec, a frequency mismatch, or an empty
// design after masking.
PanelDesign build_panel_design(const ObservationPanel& panel, const PanelSpec& spec);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p_value = 0.0;
};

struct PanelFit {
  PanelSpec spec;
  DateRange window;
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::MatrixXd covariance;  // cluster-robust
  // Intercept then trend coefficients in powers of tau, per country.
  std::map<std::string, std::vector<double>> country_effects;
  std::vector<std::string> countries;
  std::vector<std::size_t> cluster;
  std::vector<Date> dates;
  Eigen::VectorXd residuals;
  double r2 = 0.0;         // dummy-variable regression R^2
  double r2_within = 0.0;  // after absorbing effects and trends
  double adj_r2 = 0.0;
  int n_obs = 0;
  int n_clusters = 0;
  int obs_per_country = 0;  // modal count
  std::map<std::string, int> rows_per_country;
  bool inference = true;  // false with fewer than two clusters
  std::vector<std::string> warnings;

  std::vector<Coefficient> table() const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  // Fixed effect plus trend for country at rescaled time tau.
  double country_component(std::string_view country, double tau) const;
};

// Within estimator with country-level cluster-robust covariance. Throws
// DesignError naming dependent columns when the demeaned design is rank
// deficient.
PanelFit fit_fe_ols(const PanelDesign& design);

struct Combination {
  double estimate = 0.0;
  double se = 0.0;
};
// w'b and sqrt(w' V w); throws LookupError for an unknown name.
Combination linear_combo(const PanelFit& fit, const std::map<std::string, double>& weights);
// Same arithmetic on bare coefficients and covariance.
Combination linear_combo(std::span<const std::string> names, const Eigen::VectorXd& coef,
                         const Eigen::MatrixXd& covariance, const std::map<std::string, double>& weights);

struct BatteryOptions {
  std::vector<int> trends;          // degrees; empty keeps the base spec
  std::vector<int> lag_shifts;      // e.g. -3..3
  std::vector<DateRange> windows;   // alternative sample periods
  bool weekly = false;
  bool interactions = false;
  bool extended_chinese = false;
};

struct BatteryEntry {
  std::string variant;
  PanelSpec spec;
  std::optional<PanelFit> fit;
  std::string error;
};

// Baseline first, then each requested variant. Failures are recorded and
// the battery continues. Weekly variants aggregate the daily panel.
std::vector<BatteryEntry> run_spec_battery(const ObservationPanel& panel, const PanelSpec& base,
                                           const BatteryOptions& options, int jobs = 1);
// Flat table: variant, coefficient, estimate, se, t, p.
void write_battery_csv(const std::vector<BatteryEntry>& entries, std::ostream& out);

nlohmann::json to_json(const PanelFit& fit);
PanelFit fit_from_json(const nlohmann::json& j);
// name, estimate, cluster_se, t, p, stars
void write_coefficient_csv(const PanelFit& fit, std::ostream& out);

}  // namespace vacstrat::panel
