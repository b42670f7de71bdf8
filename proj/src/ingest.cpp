#include "vacstrat/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "vacstrat/countries.hpp"
#include "vacstrat/errors.hpp"

namespace vacstrat {
namespace {

constexpr std::array<std::string_view, kNumRawColumns> kLogicalNames = {
    "new_cases_per_million", "new_deaths_per_million", "cumulative_cases",
    "new_tests",             "v1_per_hundred",         "v2_per_hundred",
    "total_doses_per_hundred", "policy_index",         "mobility_retail",
    "mobility_grocery_pharmacy", "mobility_workplace"};

constexpr std::array<std::string_view, kNumPanelColumns> kPanelNames = {
    "new_cases_pm", "new_deaths_pm", "cum_cases",        "new_tests",
    "v1",           "v2",            "total_doses",      "policy",
    "mobility_retail", "mobility_grocery", "mobility_workplace",
    "mobility_index", "weekend"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

// Empty -> missing; unparseable -> missing and counted.
double parse_cell(std::string_view text, std::size_t& unparseable) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  if (text.empty()) return kMissing;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    ++unparseable;
    return kMissing;
  }
  return value;
}

void validate(const RawRecord& r, std::vector<ValidationIssue>& issues) {
  auto flag = [&](std::string msg) { issues.push_back({r.country, r.date, r.line, std::move(msg)}); };
  const double v1 = r[Column::V1];
  const double v2 = r[Column::V2];
  if (!is_missing(v2) && !is_missing(v1) && v2 > v1) flag("v2_per_hundred exceeds v1_per_hundred");
  if (!is_missing(v1) && (v1 < 0 || v1 > 100)) flag("v1_per_hundred outside [0, 100]");
  if (!is_missing(v2) && (v2 < 0 || v2 > 100)) flag("v2_per_hundred outside [0, 100]");
  const double p = r[Column::Policy];
  if (!is_missing(p) && (p < 0 || p > 100)) flag("policy_index outside [0, 100]");
  for (Column c : {Column::NewCasesPm, Column::NewDeathsPm, Column::CumCases, Column::NewTests,
                   Column::TotalDoses}) {
    const double v = r[c];
    if (!is_missing(v) && v < 0) flag(std::string(logical_name(c)) + " is negative");
  }
}

// Linear interpolation of interior gaps, zeros before the first observation,
// carry-forward after the last. Used for cumulative vaccination stocks.
int fill_vaccine_stock(std::vector<double>& v) {
  auto first = std::find_if(v.begin(), v.end(), [](double x) { return !is_missing(x); });
  if (first == v.end()) return 0;
  int filled = 0;
  const std::size_t n = v.size();
  std::size_t i0 = static_cast<std::size_t>(first - v.begin());
  for (std::size_t i = 0; i < i0; ++i, ++filled) v[i] = 0.0;
  std::size_t prev = i0;
  for (std::size_t i = i0 + 1; i < n; ++i) {
    if (is_missing(v[i])) continue;
    for (std::size_t k = prev + 1; k < i; ++k, ++filled) {
      const double w = static_cast<double>(k - prev) / static_cast<double>(i - prev);
      v[k] = v[prev] + w * (v[i] - v[prev]);
    }
    prev = i;
  }
  for (std::size_t k = prev + 1; k < n; ++k, ++filled) v[k] = v[prev];
  return filled;
}

}  // namespace

std::string_view logical_name(Column c) { return kLogicalNames[static_cast<std::size_t>(c)]; }
std::string_view panel_column_name(PanelColumn c) { return kPanelNames[static_cast<std::size_t>(c)]; }

std::string format_number(double v) {
  if (is_missing(v)) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RawSeriesTable load_raw(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return parse_raw(in, schema, path.string());
}

RawSeriesTable parse_raw(std::istream& in, const ColumnSchema& schema, std::string_view source) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(std::string(source) + ": empty file");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);
  auto find_header = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };

  const auto country_col = find_header(schema.country_header);
  if (!country_col) throw SchemaError(std::string(source) + ": missing required column '" + schema.country_header + "'");
  const auto date_col = find_header(schema.date_header);
  if (!date_col) throw SchemaError(std::string(source) + ": missing required column '" + schema.date_header + "'");

  std::array<std::optional<std::size_t>, kNumRawColumns> column_pos{};
  for (Column c : kRawColumns) {
    const auto idx = static_cast<std::size_t>(c);
    if (auto it = schema.mapped.find(c); it != schema.mapped.end()) {
      column_pos[idx] = find_header(it->second);
      if (!column_pos[idx]) {
        throw SchemaError(std::string(source) + ": missing required column '" + it->second +
                          "' (" + std::string(logical_name(c)) + ")");
      }
    } else if (schema.auto_detect) {
      column_pos[idx] = find_header(logical_name(c));
    }
  }

  RawSeriesTable table;
  std::map<std::string, std::string> canonical_cache;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    auto field = [&](std::size_t i) -> std::string_view {
      return i < fields.size() ? std::string_view(fields[i]) : std::string_view();
    };
    RawRecord rec;
    rec.line = line_no;
    const std::string raw_country(field(*country_col));
    auto cached = canonical_cache.find(raw_country);
    if (cached == canonical_cache.end()) {
      cached = canonical_cache.emplace(raw_country, canonical_country(raw_country)).first;
    }
    rec.country = cached->second;
    try {
      rec.date = Date::parse(field(*date_col));
    } catch (const ParseError& e) {
      throw ParseError(std::string(source) + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    for (Column c : kRawColumns) {
      const auto idx = static_cast<std::size_t>(c);
      rec.values[idx] = column_pos[idx] ? parse_cell(field(*column_pos[idx]), table.unparseable_cells)
                                        : kMissing;
    }
    table.records.push_back(std::move(rec));
  }

  std::stable_sort(table.records.begin(), table.records.end(), [](const RawRecord& a, const RawRecord& b) {
    return a.country != b.country ? a.country < b.country : a.date < b.date;
  });
  for (std::size_t i = 1; i < table.records.size(); ++i) {
    const auto& a = table.records[i - 1];
    const auto& b = table.records[i];
    if (a.country == b.country && a.date == b.date) {
      throw ParseError(std::string(source) + ": line " + std::to_string(b.line) + ": duplicate row for " +
                       b.country + " on " + b.date.to_string() + " (first at line " +
                       std::to_string(a.line) + ")");
    }
  }
  for (const auto& r : table.records) validate(r, table.issues);
  return table;
}

PolicyImputation impute_policy(std::span<const double> values, std::span<const int> weekend) {
  if (weekend.size() != values.size()) throw ImputationError("weekend mask length mismatch");
  const std::size_t n = values.size();
  PolicyImputation out;
  out.values.assign(values.begin(), values.end());
  std::vector<std::size_t> observed;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_missing(values[i])) observed.push_back(i);
  }
  if (observed.empty()) throw ImputationError("policy series has no observed values");

  for (std::size_t i = 0; i < observed.front(); ++i) {
    out.values[i] = values[observed.front()];
    ++out.leading_backfilled;
  }
  std::size_t next_obs = 0;  // index into `observed` of the first observation > i
  for (std::size_t i = observed.front() + 1; i < n; ++i) {
    while (next_obs < observed.size() && observed[next_obs] <= i) ++next_obs;
    if (!is_missing(values[i])) continue;
    const bool trailing = next_obs == observed.size();
    if (trailing || weekend[i] != 0) {
      out.values[i] = out.values[i - 1];
      ++out.carried;
    } else {
      const std::size_t lo = observed[next_obs - 1];
      const std::size_t hi = observed[next_obs];
      const double w = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      out.values[i] = values[lo] + w * (values[hi] - values[lo]);
      ++out.interpolated;
    }
  }
  return out;
}

std::vector<double> mobility_index(std::span<const double> retail, std::span<const double> grocery_pharmacy,
                                   std::span<const double> workplace) {
  if (retail.size() != grocery_pharmacy.size() || retail.size() != workplace.size()) {
    throw InputError("mobility components have different lengths");
  }
  std::vector<double> m(retail.size(), kMissing);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!is_missing(retail[i]) && !is_missing(grocery_pharmacy[i]) && !is_missing(workplace[i])) {
      m[i] = (retail[i] + grocery_pharmacy[i] + workplace[i]) / 3.0;
    }
  }
  return m;
}

std::optional<std::size_t> ObservationPanel::country_index(std::string_view id) const {
  for (std::size_t i = 0; i < countries.size(); ++i) {
    if (countries[i] == id) return i;
  }
  return std::nullopt;
}

const CountrySeries& ObservationPanel::at(std::string_view id) const {
  if (auto i = country_index(id)) return series[*i];
  throw LookupError("country '" + std::string(id) + "' not in panel");
}

std::optional<std::size_t> ObservationPanel::date_index(Date d) const {
  auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return std::nullopt;
  return static_cast<std::size_t>(it - dates.begin());
}

nlohmann::json to_json(const CoverageReport& report) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [country, cov] : report.countries) {
    nlohmann::json cols = nlohmann::json::object();
    for (std::size_t c = 0; c < kNumPanelColumns; ++c) cols[std::string(kPanelNames[c])] = cov.non_missing[c];
    j[country] = {{"non_missing", cols},
                  {"policy_leading_backfilled", cov.policy_leading_backfilled},
                  {"policy_imputed", cov.policy_imputed},
                  {"vaccine_cells_filled", cov.vaccine_cells_filled}};
  }
  return j;
}

PanelBuild build_panel(std::span<const RawSeriesTable> tables, DateRange window,
                       std::span<const std::string> countries) {
  if (window.last < window.first) throw AssemblyError("empty window");
  PanelBuild out;
  ObservationPanel& panel = out.panel;
  for (Date d = window.first; d <= window.last; ++d) panel.dates.push_back(d);
  const std::size_t n_days = panel.dates.size();

  std::set<std::string> seen;
  for (const auto& name : countries) {
    std::string id = canonical_country(name);
    if (!seen.insert(id).second) continue;
    panel.countries.push_back(id);
  }

  std::vector<std::string> absent;
  for (const auto& id : panel.countries) {
    CountrySeries s;
    s.country = id;
    for (auto& col : s.columns) col.assign(n_days, kMissing);
    bool present = false;
    for (const auto& table : tables) {
      auto lo = std::lower_bound(table.records.begin(), table.records.end(), id,
                                 [](const RawRecord& r, const std::string& c) { return r.country < c; });
      for (auto it = lo; it != table.records.end() && it->country == id; ++it) {
        present = true;
        if (!window.contains(it->date)) continue;
        const auto row = static_cast<std::size_t>(it->date - window.first);
        for (std::size_t c = 0; c < kNumRawColumns; ++c) {
          double& cell = s.columns[c][row];
          if (is_missing(cell)) cell = it->values[c];
        }
      }
    }
    if (!present) absent.push_back(id);
    panel.series.push_back(std::move(s));
  }
  if (!absent.empty()) {
    std::string list;
    for (const auto& a : absent) list += (list.empty() ? "" : ", ") + a;
    throw AssemblyError("countries absent from all inputs: " + list);
  }

  for (auto& s : panel.series) {
    CountryCoverage& cov = out.coverage.countries[s.country];
    auto& wk = s[PanelColumn::Weekend];
    const auto convention = country_meta(s.country).weekend;
    for (std::size_t i = 0; i < n_days; ++i) wk[i] = is_weekend(convention, panel.dates[i]) ? 1.0 : 0.0;

    auto& policy = s[PanelColumn::Policy];
    if (std::any_of(policy.begin(), policy.end(), [](double v) { return !is_missing(v); })) {
      std::vector<int> mask(n_days);
      for (std::size_t i = 0; i < n_days; ++i) mask[i] = static_cast<int>(wk[i]);
      auto imp = impute_policy(policy, mask);
      policy = std::move(imp.values);
      cov.policy_leading_backfilled = imp.leading_backfilled;
      cov.policy_imputed = imp.leading_backfilled + imp.interpolated + imp.carried;
      if (imp.leading_backfilled > 0) {
        out.warnings.push_back(s.country + ": " + std::to_string(imp.leading_backfilled) +
                               " leading policy values backfilled");
      }
    } else {
      out.warnings.push_back(s.country + ": no policy data");
    }

    for (PanelColumn c : {PanelColumn::V1, PanelColumn::V2, PanelColumn::TotalDoses}) {
      cov.vaccine_cells_filled += fill_vaccine_stock(s[c]);
    }

    s[PanelColumn::MobilityIndex] = mobility_index(s[PanelColumn::MobilityRetail], s[PanelColumn::MobilityGrocery],
                                                   s[PanelColumn::MobilityWorkplace]);
    for (std::size_t c = 0; c < kNumPanelColumns; ++c) {
      cov.non_missing[c] = static_cast<int>(
          std::count_if(s.columns[c].begin(), s.columns[c].end(), [](double v) { return !is_missing(v); }));
    }
    if (cov.non_missing[static_cast<std::size_t>(PanelColumn::MobilityIndex)] == 0) {
      out.warnings.push_back(s.country + ": no complete mobility data");
    }
  }
  return out;
}

WeeklyAggregation weekly_aggregate(const ObservationPanel& daily) {
  if (daily.frequency != Frequency::Daily) throw InputError("weekly_aggregate expects a daily panel");
  WeeklyAggregation out;
  ObservationPanel& weekly = out.panel;
  weekly.frequency = Frequency::Weekly;
  weekly.countries = daily.countries;
  const std::size_t n_weeks = daily.dates.size() / 7;
  if (const std::size_t rest = daily.dates.size() % 7; rest != 0) {
    out.warnings.push_back("dropped trailing partial week of " + std::to_string(rest) + " day(s)");
  }
  for (std::size_t w = 0; w < n_weeks; ++w) weekly.dates.push_back(daily.dates[w * 7 + 6]);

  constexpr std::array<PanelColumn, 3> flows = {PanelColumn::NewCasesPm, PanelColumn::NewDeathsPm,
                                                PanelColumn::NewTests};
  for (const auto& s : daily.series) {
    CountrySeries ws;
    ws.country = s.country;
    for (std::size_t c = 0; c < kNumPanelColumns; ++c) {
      const auto col = static_cast<PanelColumn>(c);
      auto& dst = ws.columns[c];
      dst.assign(n_weeks, kMissing);
      if (col == PanelColumn::Weekend) continue;
      const bool is_flow = std::find(flows.begin(), flows.end(), col) != flows.end();
      for (std::size_t w = 0; w < n_weeks; ++w) {
        if (is_flow) {
          double sum = 0.0;
          for (std::size_t k = 0; k < 7; ++k) sum += s.columns[c][w * 7 + k];
          dst[w] = sum;  // NaN if any day missing
        } else {
          dst[w] = s.columns[c][w * 7 + 6];
        }
      }
    }
    weekly.series.push_back(std::move(ws));
  }
  return out;
}

void write_panel_csv(const ObservationPanel& panel, std::ostream& out) {
  out << "country,date";
  for (auto name : kPanelNames) out << ',' << name;
  out << '\n';
  for (const auto& s : panel.series) {
    for (std::size_t i = 0; i < panel.dates.size(); ++i) {
      out << s.country << ',' << panel.dates[i].to_string();
      for (std::size_t c = 0; c < kNumPanelColumns; ++c) out << ',' << format_number(s.columns[c][i]);
      out << '\n';
    }
  }
}

ObservationPanel read_panel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return read_panel_csv(in);
}

ObservationPanel read_panel_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("panel CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() != kNumPanelColumns + 2 || header[0] != "country" || header[1] != "date") {
    throw SchemaError("panel CSV header does not match the canonical column order");
  }
  for (std::size_t c = 0; c < kNumPanelColumns; ++c) {
    if (header[c + 2] != kPanelNames[c]) {
      throw SchemaError("panel CSV column " + std::to_string(c + 3) + " should be '" +
                        std::string(kPanelNames[c]) + "'");
    }
  }
  ObservationPanel panel;
  std::size_t line_no = 1;
  std::size_t unparseable = 0;
  std::map<std::string, std::vector<std::pair<Date, std::array<double, kNumPanelColumns>>>> rows;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != kNumPanelColumns + 2) {
      throw ParseError("panel CSV line " + std::to_string(line_no) + ": expected " +
                       std::to_string(kNumPanelColumns + 2) + " fields");
    }
    Date d;
    try {
      d = Date::parse(f[1]);
    } catch (const ParseError& e) {
      throw ParseError("panel CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    std::array<double, kNumPanelColumns> vals{};
    for (std::size_t c = 0; c < kNumPanelColumns; ++c) vals[c] = parse_cell(f[c + 2], unparseable);
    if (!rows.count(f[0])) order.push_back(f[0]);
    rows[f[0]].emplace_back(d, vals);
  }
  if (order.empty()) throw ParseError("panel CSV has no rows");
  const auto& first = rows[order.front()];
  for (const auto& [d, v] : first) panel.dates.push_back(d);
  for (std::size_t i = 1; i < panel.dates.size(); ++i) {
    if (panel.dates[i] <= panel.dates[i - 1]) throw ParseError("panel CSV dates not increasing");
  }
  if (panel.dates.size() >= 2) {
    const int step = panel.dates[1] - panel.dates[0];
    if (step != 1 && step != 7) throw ParseError("panel CSV spacing is neither daily nor weekly");
    panel.frequency = step == 1 ? Frequency::Daily : Frequency::Weekly;
    for (std::size_t i = 1; i < panel.dates.size(); ++i) {
      if (panel.dates[i] - panel.dates[i - 1] != step) throw ParseError("panel CSV dates not contiguous");
    }
  }
  for (const auto& id : order) {
    const auto& r = rows[id];
    if (r.size() != panel.dates.size()) throw ParseError("panel CSV is not rectangular for " + id);
    CountrySeries s;
    s.country = id;
    for (auto& col : s.columns) col.resize(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i].first != panel.dates[i]) throw ParseError("panel CSV dates differ across countries for " + id);
      for (std::size_t c = 0; c < kNumPanelColumns; ++c) s.columns[c][i] = r[i].second[c];
    }
    panel.countries.push_back(id);
    panel.series.push_back(std::move(s));
  }
  return panel;
}

}  // namespace vacstrat
