#include "fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "vacstrat/counterfactual.hpp"
#include "vacstrat/countries.hpp"

namespace vacstrat::fixture {
namespace {

constexpr int kBurnIn = 120;

// Structural coefficients (weekly growth of 7-day counts).
constexpr double kV1 = -0.008;
constexpr double kV1Chinese = 0.008;
constexpr double kV2 = 0.0;
constexpr double kPolicy = -0.01;
constexpr double kMobility = 0.01;
constexpr double kLevel = -0.15;
constexpr double kTests = 0.2;

// Mobility equation.
constexpr double kMobDV1 = 0.5, kMobDV2 = 0.3, kMobV1 = 0.08, kMobV2 = 0.02;
constexpr double kMobDP = -0.2, kMobP = -0.15, kMobDC = -1.0, kMobC = -0.8, kMobM = 0.6;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

int interval_weeks(const std::string& id) {
  if (id == "CAN") return 16;
  if (id == "GBR") return 12;
  if (id == "USA") return 3;
  return 4;
}

double first_dose_cap(const std::string& id, double drawn) {
  return id == "CAN" ? 74.0 : drawn;
}

double log_sum7(const std::vector<double>& log_daily, std::size_t k) {
  double s = 0.0;
  for (std::size_t j = 0; j < 7; ++j) s += std::exp(log_daily[k - j]);
  return std::log(s);
}

}  // namespace

DateRange window() { return {Date::from_ymd(2020, 6, 1), Date::from_ymd(2021, 7, 8)}; }

std::string raw_csv(const Options& options) {
  std::ostringstream out;
  out << "country,date";
  for (Column c : kRawColumns) out << ',' << logical_name(c);
  out << '\n';

  const Date origin = options.first - kBurnIn;
  const std::size_t n = static_cast<std::size_t>(options.last - origin + 1);
  const auto& ids = default_panel_countries();
  for (std::size_t ci = 0; ci < ids.size(); ++ci) {
    const std::string& id = ids[ci];
    std::mt19937_64 rng(mix(options.seed * 1000003ULL + ci));
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

    std::vector<Date> dates(n);
    for (std::size_t k = 0; k < n; ++k) dates[k] = origin + static_cast<int>(k);

    // Total doses follow a logistic rollout; the observed split applies the
    // country's own interval through the schedule rule.
    const auto start = static_cast<double>(Date::from_ymd(2020, 12, 14) - origin) + std::floor(uniform(0, 45));
    const double mid = start + uniform(70, 130);
    const double scale = uniform(18, 30);
    const double tmax = uniform(110, 150);
    auto logistic = [&](double k) { return 1.0 / (1.0 + std::exp(-(k - mid) / scale)); };
    std::vector<double> total(n, 0.0), zeros(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const double kd = static_cast<double>(k);
      if (kd >= start) total[k] = tmax * (logistic(kd) - logistic(start)) / (1.0 - logistic(start));
    }
    const auto split = cf::make_schedule(dates, zeros, total, interval_weeks(id), first_dose_cap(id, uniform(62, 75)));
    const std::vector<double>& v1 = split.v1;
    const std::vector<double>& v2 = split.v2;

    const double phase = uniform(0, 2 * std::numbers::pi);
    std::vector<double> policy(n);
    double walk = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      walk = 0.97 * walk + 0.8 * z(rng);
      policy[k] = std::clamp(50.0 + 15.0 * std::sin(2 * std::numbers::pi * k / 180.0 + phase) + walk, 5.0, 95.0);
    }

    std::vector<double> log_tests(n);
    const double tests0 = std::log(uniform(500, 3000));
    double tnoise = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      tnoise = 0.7 * tnoise + 0.08 * z(rng);
      log_tests[k] = tests0 + 0.003 * static_cast<double>(k) + tnoise;
    }

    const double chinese = country_meta(id).chinese_vaccine ? 1.0 : 0.0;
    const double a0 = 1.6 + 0.1 * z(rng);
    const double m0 = uniform(8, 14);
    std::vector<double> ell(n), big_l(n), lt(n, 0.0), mob(n);
    const double ell0 = std::log(uniform(40, 200));
    double shock = 0.0, mob_noise = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k >= 6) lt[k] = log_sum7(log_tests, k);
      if (k < 21) {
        ell[k] = ell0 + 0.01 * z(rng);
        big_l[k] = k >= 6 ? log_sum7(ell, k) : ell[k] + std::log(7.0);
        mob[k] = (m0 + kMobP * policy[k] + kMobC * big_l[k]) / (1.0 - kMobM) + 1.5 * z(rng);
        continue;
      }
      // Daily increments summed over a week average the regressors over
      // seven days, so lags are centred three days early.
      const double weekly = a0 + (kV1 + kV1Chinese * chinese) * v1[k - 18] + kV2 * v2[k - 4] +
                            kPolicy * policy[k - 11] + kMobility * mob[k - 11] + kLevel * big_l[k - 11] +
                            kTests * (lt[k] - lt[k - 7]);
      shock = 0.6 * shock + 0.02 * z(rng);
      ell[k] = ell[k - 1] + weekly / 7.0 + shock;
      big_l[k] = log_sum7(ell, k);
      mob[k] = m0 + kMobDV1 * (v1[k] - v1[k - 7]) + kMobDV2 * (v2[k] - v2[k - 7]) + kMobV1 * v1[k - 7] +
               kMobV2 * v2[k - 7] + kMobDP * (policy[k] - policy[k - 7]) + kMobP * policy[k - 7] +
               kMobDC * (big_l[k] - big_l[k - 7]) + kMobC * big_l[k] + kMobM * mob[k - 7] + mob_noise;
      mob_noise = 0.9 * mob_noise + 0.6 * z(rng);
    }

    double cumulative = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double cases = std::exp(ell[k]);
      cumulative += cases;
      const double deaths = k >= 14 ? 0.02 * std::exp(ell[k - 14] + 0.1 * z(rng)) : 0.02 * std::exp(ell0);
      const double e1 = 2.0 * z(rng), e2 = 2.0 * z(rng);
      if (dates[k] < options.first) continue;
      const double row[] = {cases,           deaths,          cumulative,     std::exp(log_tests[k]),
                            v1[k],           v2[k],           v1[k] + v2[k],  policy[k],
                            mob[k] + e1,     mob[k] + e2,     mob[k] - e1 - e2};
      out << id << ',' << dates[k].to_string();
      for (double v : row) out << ',' << format_number(v);
      out << '\n';
    }
  }
  return out.str();
}

ObservationPanel panel(const Options& options) {
  std::istringstream in(raw_csv(options));
  std::vector<RawSeriesTable> tables{parse_raw(in, {}, "fixture")};
  const auto& ids = default_panel_countries();
  return build_panel(tables, DateRange{options.first, options.last}, ids).panel;
}

}  // namespace vacstrat::fixture
