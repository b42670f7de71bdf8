#include "vacstrat/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "vacstrat/errors.hpp"
#include "vacstrat/linalg.hpp"
#include "vacstrat/parallel.hpp"
#include "vacstrat/stats.hpp"

namespace vacstrat::cf {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using panel::Outcome;
using panel::PanelFit;
using panel::Series;
using panel::SeriesBank;
using panel::Term;

namespace {

constexpr double kDivergenceTolerance = 1e-9;
constexpr int kMinBandDraws = 20;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_inputs(std::span<const Date> dates, std::span<const double> v1, std::span<const double> v2) {
  if (v1.size() != dates.size() || v2.size() != dates.size()) throw InputError("schedule series lengths differ");
  if (dates.empty()) throw InputError("empty vaccination series");
  for (std::size_t t = 0; t < dates.size(); ++t) {
    if (is_missing(v1[t]) || is_missing(v2[t])) {
      throw InputError("missing vaccination value on " + dates[t].to_string());
    }
    if (t > 0 && v1[t] + v2[t] < v1[t - 1] + v2[t - 1] - kDivergenceTolerance) {
      throw InputError("observed total doses decrease on " + dates[t].to_string());
    }
  }
}

void mark_divergence(CfSchedule& s) {
  for (std::size_t t = 0; t < s.dates.size(); ++t) {
    if (std::fabs(s.v1[t] - s.observed_v1[t]) > kDivergenceTolerance ||
        std::fabs(s.v2[t] - s.observed_v2[t]) > kDivergenceTolerance) {
      s.divergence = t;
      return;
    }
  }
}

struct Equation {
  const PanelFit* fit = nullptr;
  std::vector<Term> terms;
  double chinese = 0.0;
  std::size_t earliest = 0;  // first panel index inside the fit window
  std::size_t last = 0;      // last panel index inside the fit window
  std::vector<double> component;  // fixed effect plus trend per panel index
};

Equation make_equation(const PanelFit& fit, const ObservationPanel& panel, const std::string& country) {
  Equation eq;
  eq.fit = &fit;
  eq.terms = panel::equation_terms(fit.spec);
  if (eq.terms.size() != fit.names.size()) throw SimulationError("fit does not match its equation terms");
  for (std::size_t j = 0; j < eq.terms.size(); ++j) {
    if (eq.terms[j].name != fit.names[j]) throw SimulationError("fit coefficient order does not match its equation");
  }
  const auto& meta_bank = panel::make_bank(panel, *panel.country_index(country), fit.spec.chinese_set);
  eq.chinese = meta_bank.chinese;
  const auto& dates = panel.dates;
  eq.earliest = dates.size();
  for (std::size_t t = 0; t < dates.size(); ++t) {
    if (dates[t] >= fit.window.first && dates[t] <= fit.window.last) {
      if (eq.earliest == dates.size()) eq.earliest = t;
      eq.last = t;
    }
  }
  if (eq.earliest == dates.size()) throw SimulationError("fit window does not overlap the panel");
  const double span = std::max(1, fit.window.last - fit.window.first);
  eq.component.assign(dates.size(), kMissing);
  for (std::size_t t = eq.earliest; t <= eq.last; ++t) {
    eq.component[t] = fit.country_component(country, static_cast<double>(dates[t] - fit.window.first) / span);
  }
  return eq;
}

// x_t' b, or missing.
double linear_part(const Equation& eq, SeriesBank& bank, std::size_t t, const VectorXd& b) {
  bank.chinese = eq.chinese;
  double v = 0.0;
  for (std::size_t j = 0; j < eq.terms.size(); ++j) {
    const double x = panel::evaluate(eq.terms[j], bank, t, eq.earliest, 1);
    if (is_missing(x)) return kMissing;
    v += x * b[static_cast<Eigen::Index>(j)];
  }
  return v;
}

std::vector<double> residuals(const Equation& eq, SeriesBank& bank, const VectorXd& b) {
  std::vector<double> e(bank[Series::V1].size(), kMissing);
  const Outcome outcome = eq.fit->spec.outcome;
  for (std::size_t t = eq.earliest; t <= eq.last; ++t) {
    const double y = panel::evaluate_outcome(outcome, bank, t, eq.earliest, 1);
    const double xb = linear_part(eq, bank, t, b);
    if (is_missing(y) || is_missing(xb)) continue;
    e[t] = y - eq.component[t] - xb;
  }
  return e;
}

CounterfactualResult simulate(const PanelFit& outcome_fit, const PanelFit& mobility_fit, const ObservationPanel& panel,
                              const Scenario& scenario, int jobs, Outcome outcome) {
  scenario.validate();
  if (outcome_fit.spec.outcome != outcome) {
    throw SimulationError("expected a " + std::string(panel::to_string(outcome)) + " equation fit");
  }
  if (mobility_fit.spec.outcome != Outcome::Mobility) throw SimulationError("expected a mobility equation fit");
  if (panel.frequency != Frequency::Daily) throw SimulationError("counterfactual simulation needs a daily panel");
  if (outcome_fit.spec.frequency != Frequency::Daily || mobility_fit.spec.frequency != Frequency::Daily) {
    throw SimulationError("counterfactual simulation needs daily-frequency fits");
  }
  const auto ci = panel.country_index(scenario.country);
  if (!ci) throw SimulationError("country " + scenario.country + " is not in the panel");
  const std::string& country = scenario.country;
  if (!outcome_fit.country_effects.count(country) || !mobility_fit.country_effects.count(country)) {
    throw SimulationError("country " + country + " was not in the estimation sample of both fits");
  }
  const auto& mob = panel.series[*ci][PanelColumn::MobilityIndex];
  if (std::all_of(mob.begin(), mob.end(), [](double v) { return is_missing(v); })) {
    throw SimulationError("country " + country + " has no mobility data");
  }

  CounterfactualResult result;
  result.country = country;
  result.outcome = outcome;
  if (outcome == Outcome::Deaths && mobility_fit.spec.info_variable() != panel::InfoVariable::Deaths) {
    result.warnings.push_back("death paths use a mobility equation with case information variables");
  }
  if (outcome == Outcome::Cases && mobility_fit.spec.info_variable() != panel::InfoVariable::Cases) {
    result.warnings.push_back("case paths use a mobility equation with death information variables");
  }

  const auto& cs = panel.series[*ci];
  const CfSchedule schedule = scenario.schedule
                                  ? *scenario.schedule
                                  : make_schedule(panel.dates, cs[PanelColumn::V1], cs[PanelColumn::V2],
                                                  scenario.interval_weeks, scenario.v1_cap);
  if (schedule.v1.size() != panel.dates.size()) throw SimulationError("schedule does not cover the panel dates");
  result.warnings.insert(result.warnings.end(), schedule.warnings.begin(), schedule.warnings.end());

  const SeriesBank observed = panel::make_bank(panel, *ci, outcome_fit.spec.chinese_set);
  const Equation eq_y = make_equation(outcome_fit, panel, country);
  const Equation eq_m = make_equation(mobility_fit, panel, country);
  const Series level_series = panel::outcome_series(outcome);

  std::size_t start = eq_y.earliest;
  if (schedule.divergence) {
    start = std::max(start, *schedule.divergence);
    result.divergence = panel.dates[*schedule.divergence];
  }

  const int draws = scenario.point_estimates ? 1 : scenario.draws;
  result.draws = draws;
  if (!scenario.point_estimates && draws < kMinBandDraws) {
    result.warnings.push_back("fewer than " + std::to_string(kMinBandDraws) + " draws: percentile bands are coarse");
  }
  MatrixXd factor;
  if (!scenario.point_estimates) {
    if (!outcome_fit.inference || !outcome_fit.covariance.allFinite()) {
      throw SimulationError("outcome fit has no usable covariance for parameter draws");
    }
    bool clipped = false;
    factor = linalg::psd_factor(outcome_fit.covariance, &clipped);
    if (clipped) result.warnings.push_back("coefficient covariance repaired by clipping negative eigenvalues");
  }

  SeriesBank scratch = observed;
  const std::vector<double> mobility_resid = residuals(eq_m, scratch, mobility_fit.coef);

  const std::size_t n = panel.dates.size();
  std::vector<std::vector<double>> paths(static_cast<std::size_t>(draws));
  std::vector<int> fallbacks(static_cast<std::size_t>(draws), 0);
  parallel_for(static_cast<std::size_t>(draws), jobs, [&](std::size_t r) {
    VectorXd b = outcome_fit.coef;
    if (!scenario.point_estimates) {
      std::mt19937_64 rng(splitmix64(scenario.seed ^ splitmix64(r)));
      std::normal_distribution<double> normal(0.0, 1.0);
      VectorXd z(b.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
      b += factor * z;
    }
    SeriesBank bank = observed;
    const std::vector<double> eps = residuals(eq_y, bank, b);
    bank[Series::V1] = schedule.v1;
    bank[Series::V2] = schedule.v2;
    const std::size_t step_back = 7;
    int fallback = 0;
    for (std::size_t t = start; t <= eq_y.last; ++t) {
      const double xb = is_missing(eps[t]) ? kMissing : linear_part(eq_y, bank, t, b);
      if (!is_missing(xb) && t >= step_back && !is_missing(bank[level_series][t - step_back])) {
        bank[level_series][t] = bank[level_series][t - step_back] + eq_y.component[t] + xb + eps[t];
      } else if (!is_missing(observed[level_series][t])) {
        ++fallback;
      }
      if (t >= eq_m.earliest && t <= eq_m.last && !is_missing(mobility_resid[t])) {
        const double xm = linear_part(eq_m, bank, t, mobility_fit.coef);
        if (!is_missing(xm)) bank[Series::M][t] = eq_m.component[t] + xm + mobility_resid[t];
      }
    }
    paths[r] = bank[level_series];
    fallbacks[r] = fallback;
  });
  result.observed_fallback_rows = fallbacks.front();

  const auto& daily = cs[outcome == Outcome::Cases ? PanelColumn::NewCasesPm : PanelColumn::NewDeathsPm];
  std::vector<double> values;
  for (std::size_t t = eq_y.earliest; t <= eq_y.last && t < n; ++t) {
    CfDay day;
    day.date = panel.dates[t];
    day.observed = observed[level_series][t];
    values.clear();
    for (const auto& p : paths) {
      if (!is_missing(p[t])) values.push_back(p[t]);
    }
    if (values.empty()) {
      day.mean = day.p5 = day.p95 = day.delta = kMissing;
    } else {
      double sum = 0.0;
      for (double v : values) sum += v;
      day.mean = sum / static_cast<double>(values.size());
      day.p5 = stats::quantile(values, 0.05);
      day.p95 = stats::quantile(values, 0.95);
      day.delta = day.mean - day.observed;
    }
    day.observed_level = is_missing(daily[t]) ? kMissing : daily[t] * scenario.population_millions;
    day.cf_level = is_missing(day.delta) || is_missing(day.observed_level) ? day.observed_level
                                                                            : day.observed_level * std::exp(day.delta);
    result.days.push_back(day);
  }
  return result;
}

std::string fmt(double v) { return format_number(v); }

}  // namespace

CfSchedule observed_schedule(std::span<const Date> dates, std::span<const double> v1, std::span<const double> v2) {
  check_inputs(dates, v1, v2);
  CfSchedule s;
  s.dates.assign(dates.begin(), dates.end());
  s.v1.assign(v1.begin(), v1.end());
  s.v2.assign(v2.begin(), v2.end());
  s.observed_v1 = s.v1;
  s.observed_v2 = s.v2;
  return s;
}

CfSchedule make_schedule(std::span<const Date> dates, std::span<const double> v1, std::span<const double> v2,
                         int interval_weeks, double v1_cap) {
  if (interval_weeks < 1) throw InputError("interval_weeks must be at least 1");
  if (!(v1_cap > 0.0) || v1_cap > 100.0) throw InputError("v1_cap must lie in (0, 100]");
  check_inputs(dates, v1, v2);
  CfSchedule s = observed_schedule(dates, v1, v2);
  const std::size_t n = dates.size();
  const std::size_t interval = static_cast<std::size_t>(interval_weeks) * 7;
  bool cap_exceeded = false;
  for (std::size_t t = 1; t < n; ++t) {
    const double total = v1[t] + v2[t];
    const double flow = std::max(0.0, total - (s.v1[t - 1] + s.v2[t - 1]));
    const double a1 = s.v1[t - 1];
    const double a2 = s.v2[t - 1];
    const double due = t >= interval ? std::max(0.0, s.v1[t - interval] - a2) : 0.0;
    const double second = std::min(flow, due);
    double left = flow - second;
    const double cap = std::max(v1_cap, v1[t]);
    double first = std::min(left, std::max(0.0, cap - a1));
    left -= first;
    const double early = std::min(left, std::max(0.0, a1 + first - a2 - second));
    left -= early;
    if (early > kDivergenceTolerance) ++s.early_second_dose_days;
    if (left > kDivergenceTolerance) cap_exceeded = true;
    first += left;
    s.v1[t] = a1 + first;
    s.v2[t] = total - s.v1[t];
  }
  if (s.early_second_dose_days > 0) {
    s.warnings.push_back("second doses given before the interval on " + std::to_string(s.early_second_dose_days) +
                         " day(s) to conserve the observed dose flow");
  }
  if (cap_exceeded) s.warnings.push_back("first-dose cap exceeded to conserve the observed dose flow");
  mark_divergence(s);
  return s;
}

void Scenario::validate() const {
  if (interval_weeks < 1) throw InputError("interval_weeks must be at least 1");
  if (!(v1_cap > 0.0) || v1_cap > 100.0) throw InputError("v1_cap must lie in (0, 100]");
  if (draws < 1) throw InputError("draws must be positive");
  if (!(population_millions > 0.0)) throw InputError("population must be positive");
}

CounterfactualResult simulate_paths(const PanelFit& outcome_fit, const PanelFit& mobility_fit,
                                    const ObservationPanel& panel, const Scenario& scenario, int jobs) {
  return simulate(outcome_fit, mobility_fit, panel, scenario, jobs, outcome_fit.spec.outcome == Outcome::Deaths
                                                                        ? Outcome::Deaths
                                                                        : Outcome::Cases);
}

CounterfactualResult death_paths(const PanelFit& death_fit, const PanelFit& mobility_fit, const ObservationPanel& panel,
                                 const Scenario& scenario, int jobs) {
  return simulate(death_fit, mobility_fit, panel, scenario, jobs, Outcome::Deaths);
}

std::vector<SummaryRow> summarize(const CounterfactualResult& result, std::span<const DateRange> windows) {
  if (result.days.empty()) throw SummaryError("empty counterfactual result");
  auto make_row = [&](std::string label, DateRange w) {
    SummaryRow row;
    row.label = std::move(label);
    row.window = w;
    double obs = 0.0, delta = 0.0;
    for (const auto& d : result.days) {
      if (!w.contains(d.date) || is_missing(d.observed_level) || is_missing(d.cf_level)) continue;
      ++row.days;
      obs += d.observed_level;
      delta += d.cf_level - d.observed_level;
    }
    if (row.days == 0) {
      throw SummaryError("window " + w.first.to_string() + ":" + w.last.to_string() + " has no simulated days");
    }
    row.average_delta = delta / row.days;
    row.cumulative_delta = delta;
    row.percent_change = obs != 0.0 ? 100.0 * delta / obs : 0.0;
    return row;
  };
  std::vector<SummaryRow> rows;
  for (const auto& w : windows) {
    if (w.last < w.first) throw SummaryError("window ends before it starts");
    rows.push_back(make_row(w.first.to_string() + ":" + w.last.to_string(), w));
  }
  rows.push_back(make_row("full", DateRange{result.days.front().date, result.days.back().date}));
  return rows;
}

void write_result_csv(const CounterfactualResult& result, std::ostream& out) {
  out << "date,observed,cf_mean,cf_p5,cf_p95,delta,observed_level,cf_level\n";
  for (const auto& d : result.days) {
    out << d.date.to_string() << ',' << fmt(d.observed) << ',' << fmt(d.mean) << ',' << fmt(d.p5) << ','
        << fmt(d.p95) << ',' << fmt(d.delta) << ',' << fmt(d.observed_level) << ',' << fmt(d.cf_level) << '\n';
  }
}

void write_schedule_csv(const CfSchedule& s, std::ostream& out) {
  out << "date,v1_observed,v2_observed,v1_cf,v2_cf\n";
  for (std::size_t t = 0; t < s.dates.size(); ++t) {
    out << s.dates[t].to_string() << ',' << fmt(s.observed_v1[t]) << ',' << fmt(s.observed_v2[t]) << ','
        << fmt(s.v1[t]) << ',' << fmt(s.v2[t]) << '\n';
  }
}

nlohmann::json to_json(const std::vector<SummaryRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"window", r.label},
                   {"first", r.window.first.to_string()},
                   {"last", r.window.last.to_string()},
                   {"days", r.days},
                   {"average_daily_delta", r.average_delta},
                   {"cumulative_delta", r.cumulative_delta},
                   {"percent_change", r.percent_change}});
  }
  return arr;
}

void write_svg(const CounterfactualResult& result, std::ostream& out) {
  constexpr double width = 800, height = 400, left = 60, right = 20, top = 30, bottom = 40;
  struct Point {
    double obs, cf, lo, hi;
  };
  std::vector<Point> pts;
  double ymax = 0.0;
  for (const auto& d : result.days) {
    Point p{d.observed_level, d.cf_level, kMissing, kMissing};
    if (!is_missing(d.observed_level) && !is_missing(d.p5)) {
      p.lo = d.observed_level * std::exp(d.p5 - d.observed);
      p.hi = d.observed_level * std::exp(d.p95 - d.observed);
    }
    for (double v : {p.obs, p.cf, p.hi}) {
      if (std::isfinite(v)) ymax = std::max(ymax, v);
    }
    pts.push_back(p);
  }
  if (ymax <= 0.0) ymax = 1.0;
  const double n = std::max<double>(1.0, static_cast<double>(pts.size()) - 1.0);
  auto sx = [&](std::size_t i) { return left + (width - left - right) * static_cast<double>(i) / n; };
  auto sy = [&](double v) { return top + (height - top - bottom) * (1.0 - v / ymax); };
  auto coord = [](double x, double y) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
    return std::string(buf);
  };
  auto polyline = [&](auto get, const char* style) {
    std::string d;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = get(pts[i]);
      if (std::isfinite(v)) d += coord(sx(i), sy(v));
    }
    out << "<polyline fill=\"none\" " << style << " points=\"" << d << "\"/>\n";
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::string band;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::isfinite(pts[i].hi)) band += coord(sx(i), sy(pts[i].hi));
  }
  for (std::size_t i = pts.size(); i-- > 0;) {
    if (std::isfinite(pts[i].lo)) band += coord(sx(i), sy(pts[i].lo));
  }
  if (!band.empty()) out << "<polygon fill=\"#f4b6b6\" stroke=\"none\" points=\"" << band << "\"/>\n";
  polyline([](const Point& p) { return p.obs; }, "stroke=\"black\" stroke-width=\"1.5\"");
  polyline([](const Point& p) { return p.cf; }, "stroke=\"#c0392b\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\"");
  out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
  char label[64];
  std::snprintf(label, sizeof label, "%.4g", ymax);
  out << "<text x=\"4\" y=\"" << top + 4 << "\" font-size=\"11\">" << label << "</text>\n";
  if (!result.days.empty()) {
    out << "<text x=\"" << left << "\" y=\"" << height - 10 << "\" font-size=\"11\">"
        << result.days.front().date.to_string() << "</text>\n";
    out << "<text x=\"" << width - right - 70 << "\" y=\"" << height - 10 << "\" font-size=\"11\">"
        << result.days.back().date.to_string() << "</text>\n";
  }
  out << "<text x=\"" << left + 10 << "\" y=\"18\" font-size=\"13\">" << result.country << " daily "
      << panel::to_string(result.outcome) << ": observed (black), counterfactual mean (red), 5-95% band</text>\n";
  out << "</svg>\n";
}

}  // namespace vacstrat::cf
