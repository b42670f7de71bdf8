#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vacstrat/date.hpp"

namespace vacstrat {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

// Raw input columns, in canonical panel CSV order.
enum class Column : std::size_t {
  NewCasesPm,
  NewDeathsPm,
  CumCases,
  NewTests,
  V1,
  V2,
  TotalDoses,
  Policy,
  MobilityRetail,
  MobilityGrocery,
  MobilityWorkplace,
};
inline constexpr std::size_t kNumRawColumns = 11;
inline constexpr std::array<Column, kNumRawColumns> kRawColumns = {
    Column::NewCasesPm, Column::NewDeathsPm,     Column::CumCases,
    Column::NewTests,   Column::V1,              Column::V2,
    Column::TotalDoses, Column::Policy,          Column::MobilityRetail,
    Column::MobilityGrocery, Column::MobilityWorkplace};

// Header name expected in raw input files when no schema override is given.
std::string_view logical_name(Column c);

using RowValues = std::array<double, kNumRawColumns>;

struct RawRecord {
  std::string country;  // canonical id
  Date date;
  RowValues values;
  std::size_t line = 0;  // 1-based source line

  double& operator[](Column c) { return values[static_cast<std::size_t>(c)]; }
  double operator[](Column c) const { return values[static_cast<std::size_t>(c)]; }
};

struct ValidationIssue {
  std::string country;
  Date date;
  std::size_t line = 0;
  std::string message;
};

struct RawSeriesTable {
  std::vector<RawRecord> records;  // sorted by (country, date)
  std::vector<ValidationIssue> issues;
  std::size_t unparseable_cells = 0;
};

// Maps logical columns onto CSV headers. Columns listed in `mapped` are
// required; when `auto_detect` is set, any header equal to a logical name is
// also picked up. Everything else is missing.
struct ColumnSchema {
  std::string country_header = "country";
  std::string date_header = "date";
  std::map<Column, std::string> mapped;
  bool auto_detect = true;
};

RawSeriesTable load_raw(const std::filesystem::path& path, const ColumnSchema& schema = {});
RawSeriesTable parse_raw(std::istream& in, const ColumnSchema& schema = {},
                         std::string_view source = "<stream>");

struct PolicyImputation {
  std::vector<double> values;
  int leading_backfilled = 0;
  int interpolated = 0;
  int carried = 0;
};

// Fills policy-index gaps: weekdays by linear interpolation between the
// nearest observed neighbours, weekend days (per `weekend`) and trailing gaps
// by carrying the previous value, leading gaps by backfilling the first
// observation. Observed cells are never altered.
PolicyImputation impute_policy(std::span<const double> values, std::span<const int> weekend);

// Mean of the three mobility components; missing unless all three present.
std::vector<double> mobility_index(std::span<const double> retail,
                                   std::span<const double> grocery_pharmacy,
                                   std::span<const double> workplace);

enum class Frequency { Daily, Weekly };

enum class PanelColumn : std::size_t {
  NewCasesPm,
  NewDeathsPm,
  CumCases,
  NewTests,
  V1,
  V2,
  TotalDoses,
  Policy,
  MobilityRetail,
  MobilityGrocery,
  MobilityWorkplace,
  MobilityIndex,
  Weekend,
};
inline constexpr std::size_t kNumPanelColumns = 13;

std::string_view panel_column_name(PanelColumn c);
inline PanelColumn to_panel_column(Column c) { return static_cast<PanelColumn>(c); }

struct CountrySeries {
  std::string country;
  std::array<std::vector<double>, kNumPanelColumns> columns;

  std::vector<double>& operator[](PanelColumn c) { return columns[static_cast<std::size_t>(c)]; }
  const std::vector<double>& operator[](PanelColumn c) const {
    return columns[static_cast<std::size_t>(c)];
  }
};

// Rectangular country x date grid. Weekly panels carry the block-end date of
// each 7-day block.
struct ObservationPanel {
  std::vector<std::string> countries;
  std::vector<Date> dates;
  std::vector<CountrySeries> series;  // parallel to `countries`
  Frequency frequency = Frequency::Daily;

  std::optional<std::size_t> country_index(std::string_view id) const;
  const CountrySeries& at(std::string_view id) const;
  std::optional<std::size_t> date_index(Date d) const;
  int step_days() const { return frequency == Frequency::Daily ? 1 : 7; }
};

struct CountryCoverage {
  std::array<int, kNumPanelColumns> non_missing{};
  int policy_leading_backfilled = 0;
  int policy_imputed = 0;
  int vaccine_cells_filled = 0;
};

struct CoverageReport {
  std::map<std::string, CountryCoverage> countries;
};
nlohmann::json to_json(const CoverageReport& report);

struct PanelBuild {
  ObservationPanel panel;
  CoverageReport coverage;
  std::vector<std::string> warnings;
};

// Aligns the tables onto a daily grid over `window` for `countries` (canonical
// ids or aliases). The first non-missing value across tables wins for a cell.
PanelBuild build_panel(std::span<const RawSeriesTable> tables, DateRange window,
                       std::span<const std::string> countries);

struct WeeklyAggregation {
  ObservationPanel panel;
  std::vector<std::string> warnings;
};

// Flows are summed per 7-day block (missing if any day is missing), stocks
// take the block-end value, and a trailing partial week is dropped.
WeeklyAggregation weekly_aggregate(const ObservationPanel& daily);

// Canonical panel CSV: one row per country-day, fixed column order.
void write_panel_csv(const ObservationPanel& panel, std::ostream& out);
ObservationPanel read_panel_csv(const std::filesystem::path& path);
ObservationPanel read_panel_csv(std::istream& in);

// Shared numeric formatting: 17 significant digits, empty for missing.
std::string format_number(double v);

}  // namespace vacstrat
