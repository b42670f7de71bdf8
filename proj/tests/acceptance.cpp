// Acceptance checks, one PASS/FAIL line each.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cf_support.hpp"
#include "oracles.hpp"
#include "vacstrat/allocation.hpp"
#include "vacstrat/counterfactual.hpp"
#include "vacstrat/panel.hpp"
#include "vacstrat/parallel.hpp"
#include "vacstrat/timeseries.hpp"

using namespace vacstrat;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double round4(double v) { return std::round(v * 1e4) / 1e4; }

// Published cells, as fractions.
Outcome protection_table() {
  const auto t0 = Clock::now();
  const std::array<std::array<double, 2>, 5> doses = {{{0.70, 0.0}, {0.60, 0.10}, {0.50, 0.20}, {0.40, 0.30}, {0.35, 0.35}}};
  const std::array<double, 5> case1 = {0.630, 0.545, 0.460, 0.375, 0.333};
  const std::array<double, 5> case2 = {0.350, 0.345, 0.340, 0.335, 0.3325};
  int matched = 0;
  std::string bad;
  for (std::size_t i = 0; i < 5; ++i) {
    const double a = protection_level({0.90, 0.95}, doses[i][0], doses[i][1]);
    const double b = protection_level({0.50, 0.95}, doses[i][0], doses[i][1]);
    if (round4(a) == round4(case1[i])) ++matched;
    else bad += " case1 row " + std::to_string(i + 1) + ": " + fmt("%.4f", a) + " vs " + fmt("%.4f", case1[i]);
    if (round4(b) == round4(case2[i])) ++matched;
    else bad += " case2 row " + std::to_string(i + 1) + ": " + fmt("%.4f", b) + " vs " + fmt("%.4f", case2[i]);
  }
  const double s = seconds_since(t0);
  return {matched == 10 && s < 1.0, std::to_string(matched) + "/10 cells" + bad + fmt(", %.3fs", s)};
}

Outcome dominance() {
  const auto t0 = Clock::now();
  const double cap = 100.0 / 120.0;
  std::vector<RolloutSchedule> s = {simulate_rollout(100, cap, 21, 120), simulate_rollout(100, cap, 90, 120),
                                    simulate_rollout(100, cap, 120, 120)};
  bool ok = true;
  std::string detail;
  for (const EfficacyProfile& prof : {EfficacyProfile{0.90, 0.95}, EfficacyProfile{0.50, 0.95}}) {
    const auto p21 = protection_path(s[0], prof);
    const auto p90 = protection_path(s[1], prof);
    const auto p120 = protection_path(s[2], prof);
    int violations = 0;
    for (std::size_t t = 22; t < p21.size(); ++t) {
      if (p120[t] < p90[t] || p90[t] < p21[t]) ++violations;
    }
    ok = ok && violations == 0 && dominance_report(s, prof).dominates_from(22);
    detail += fmt("ve1=%.2f: ", prof.ve1) + std::to_string(violations) + " violations; ";
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 1.0, detail + fmt("%.3fs", secs)};
}

Outcome chinese_sums() {
  struct Sum {
    const char* label;
    double own, chn, published;
  };
  const std::vector<Sum> sums = {{"cases V1", -0.0077, 0.0149, 0.0072},
                                 {"cases V2", 0.0024, -0.0138, -0.0114},
                                 {"deaths V1", -0.0093, 0.0169, 0.0075},
                                 {"deaths V2", 0.0014, -0.0116, -0.0102}};
  const std::vector<std::string> names = {"own", "chn"};
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
  bool ok = true;
  std::string detail;
  for (const auto& s : sums) {
    Eigen::VectorXd b(2);
    b << s.own, s.chn;
    const double v = panel::linear_combo(names, b, cov, {{"own", 1.0}, {"chn", 1.0}}).estimate;
    const bool match = round4(v) == round4(s.published);
    ok = ok && match;
    detail += std::string(s.label) + fmt(" %.4f", round4(v)) + fmt(" (published %.4f)", s.published) +
              (match ? "" : " MISMATCH") + "; ";
  }
  return {ok, detail};
}

Outcome fe_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20210708);
  double coef_err = 0.0, se_err = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto d = oracle::random_design(rng, 5, 50, 3, i % 4);
    const auto fit = panel::fit_fe_ols(d);
    const auto o = oracle::dummy_ols(d);
    const auto cov = oracle::naive_cluster_cov(o, d.cluster, d.countries.size());
    coef_err = std::max(coef_err, (fit.coef - o.slopes).cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < cov.rows(); ++k)
      se_err = std::max(se_err, std::abs(std::sqrt(fit.covariance(k, k)) - std::sqrt(cov(k, k))));
  }
  const double s = seconds_since(t0);
  return {coef_err <= 1e-8 && se_err <= 1e-10 && s < 10.0,
          fmt("max coef diff %.2e", coef_err) + fmt(", max se diff %.2e", se_err) + fmt(", %.2fs", s)};
}

Outcome arma() {
  const auto t0 = Clock::now();
  // Reduction to least squares.
  auto w = oracle::simulate_armax(1, 500, {}, {}, 0.3, {0.7, -1.1});
  const auto fit0 = ts::fit_arimax(ts::make_design(w.y, w.x, {"a", "b"}), {0, 1, 0});
  Eigen::MatrixXd z(500, 3);
  z << Eigen::VectorXd::Ones(500), w.x;
  const Eigen::VectorXd ols = z.householderQr().solve(w.y);
  double ls_err = 0.0;
  for (int j = 0; j < 3; ++j) ls_err = std::max(ls_err, std::abs(fit0.regression[static_cast<std::size_t>(j)].value - ols[j]));

  // Recovery and order selection on ARMA(1,1) noise, phi 0.5 and theta -0.3.
  const int runs = 50;
  std::vector<int> covered(runs, 0), selected(runs, 0);
  parallel_for(runs, static_cast<int>(std::max(1u, std::thread::hardware_concurrency())), [&](std::size_t r) {
    const auto s = oracle::simulate_armax(1000 + r, 2000, {0.5}, {-0.3}, 0.0, {});
    const auto d = ts::make_design(s.y, s.x, {});
    const auto fit = ts::fit_arimax(d, {1, 1, 1});
    const bool in = std::abs(fit.ar[0].value - 0.5) <= 3 * fit.ar[0].se &&
                    std::abs(fit.ma[0].value + 0.3) <= 3 * fit.ma[0].se &&
                    std::abs(fit.regression[0].value) <= 3 * fit.regression[0].se;
    covered[r] = in ? 1 : 0;
    const auto sel = ts::select_order(d, 3, 3);
    selected[r] = sel.order == ts::ArimaOrder{1, 1, 1} ? 1 : 0;
  });
  int cov_n = 0, sel_n = 0;
  for (int r = 0; r < runs; ++r) {
    cov_n += covered[static_cast<std::size_t>(r)];
    sel_n += selected[static_cast<std::size_t>(r)];
  }
  const double s = seconds_since(t0);
  return {ls_err <= 1e-8 && cov_n >= 47 && sel_n >= 35 && s < 120.0,
          fmt("least-squares diff %.2e", ls_err) + ", within 3 SE " + std::to_string(cov_n) + "/50, true order " +
              std::to_string(sel_n) + "/50" + fmt(", %.1fs", s)};
}

Outcome fixed_point() {
  const auto& f = cfsupport::fixture_fits();
  double worst = 0.0;
  int fallbacks = 0;
  for (const auto& id : f.panel.countries) {
    const auto& s = f.panel.at(id);
    cf::Scenario sc;
    sc.country = id;
    sc.point_estimates = true;
    sc.draws = 1;
    sc.schedule = cf::observed_schedule(f.panel.dates, s[PanelColumn::V1], s[PanelColumn::V2]);
    for (const auto& r : {cf::simulate_paths(f.cases, f.mobility_cases, f.panel, sc),
                          cf::death_paths(f.deaths, f.mobility_deaths, f.panel, sc)}) {
      fallbacks += r.observed_fallback_rows;
      for (const auto& d : r.days)
        if (!std::isnan(d.observed)) worst = std::max(worst, std::abs(d.mean - d.observed));
    }
  }
  return {worst <= 1e-10, std::to_string(f.panel.countries.size()) + " countries, max |cf - observed| " +
                              fmt("%.2e", worst) + ", recursion skipped on " + std::to_string(fallbacks) + " rows"};
}

Outcome determinism_and_bands() {
  const auto& f = cfsupport::fixture_fits();
  cf::Scenario sc;
  sc.country = "USA";
  sc.v1_cap = 55;
  sc.draws = 200;
  sc.seed = 7;
  auto text = [](const cf::CounterfactualResult& r) {
    std::ostringstream o;
    cf::write_result_csv(r, o);
    return o.str();
  };
  const bool same = text(cf::simulate_paths(f.cases, f.mobility_cases, f.panel, sc, 1)) ==
                    text(cf::simulate_paths(f.cases, f.mobility_cases, f.panel, sc, 8));

  const auto m = cfsupport::linear_model(f);
  sc.draws = 2000;
  const auto r = cf::simulate_paths(m.outcome, m.mobility, f.panel, sc, 8);
  const auto& usa = f.panel.at("USA");
  const auto sched = cf::make_schedule(f.panel.dates, usa[PanelColumn::V1], usa[PanelColumn::V2], 8, 55);
  const auto g = cfsupport::exposure(f.panel, "USA", sched, 21, 7);
  const auto i1 = static_cast<Eigen::Index>(*m.outcome.index_of("V1_L21"));
  const auto i2 = static_cast<Eigen::Index>(*m.outcome.index_of("V2_L7"));
  const auto& v = m.outcome.covariance;
  double worst = 0.0;
  int days = 0;
  for (const auto& d : r.days) {
    const auto t = static_cast<std::size_t>(*f.panel.date_index(d.date));
    const double var = g[t][0] * g[t][0] * v(i1, i1) + 2 * g[t][0] * g[t][1] * v(i1, i2) + g[t][1] * g[t][1] * v(i2, i2);
    if (var <= 1e-8) continue;
    const double analytic = 2 * 1.6448536269514722 * std::sqrt(var);
    worst = std::max(worst, std::abs((d.p95 - d.p5) / analytic - 1.0));
    ++days;
  }
  return {same && days > 0 && worst <= 0.10, std::string(same ? "byte-identical" : "outputs differ") +
                                                  ", band width vs analytic over " + std::to_string(days) +
                                                  fmt(" days: max rel diff %.3f", worst)};
}

Outcome fixture_reproduction() {
  const auto& f = cfsupport::fixture_fits();
  std::string detail;
  bool ok = true;
  for (auto o : {panel::Outcome::Cases, panel::Outcome::Deaths}) {
    for (int trend = 0; trend <= 3; ++trend) {
      panel::PanelSpec s;
      s.outcome = o;
      s.trend = trend;
      s.chinese_terms = true;
      s.window = DateRange{Date::parse("2020-06-01"), Date::parse("2021-07-08")};
      const auto fit = panel::fit_fe_ols(panel::build_panel_design(f.panel, s));
      const auto tab = fit.table();
      const auto& terms = panel::equation_terms(s);
      const auto& v1 = tab[*fit.index_of(terms[0].name)];
      const auto& v2 = tab[*fit.index_of(terms[1].name)];
      const auto& mob = tab[*fit.index_of(terms[3].name)];
      const bool good = v1.estimate < 0 && v1.p_value < 0.01 && v2.p_value >= 0.10 && mob.estimate > 0 &&
                        mob.p_value < 0.05;
      if (!good) detail += std::string(panel::to_string(o)) + "/" + std::string(panel::trend_name(trend)) + " off; ";
      ok = ok && good;
    }
  }
  const std::vector<DateRange> late = {{Date::parse("2021-05-01"), Date::parse("2021-07-08")}};
  auto late_change = [&](const std::string& id, double cap, panel::Outcome o) {
    cf::Scenario sc;
    sc.country = id;
    sc.interval_weeks = 8;
    sc.v1_cap = cap;
    sc.point_estimates = true;
    const auto r = o == panel::Outcome::Cases ? cf::simulate_paths(f.cases, f.mobility_cases, f.panel, sc)
                                              : cf::death_paths(f.deaths, f.mobility_deaths, f.panel, sc);
    return cf::summarize(r, late).front().percent_change;
  };
  const double us_c = late_change("USA", 55, panel::Outcome::Cases);
  const double us_d = late_change("USA", 55, panel::Outcome::Deaths);
  const double ca_c = late_change("CAN", 65, panel::Outcome::Cases);
  ok = ok && us_c < 0 && us_d < 0 && ca_c > 0;
  detail += fmt("late-period USA cases %+.1f%%", us_c) +
            fmt(", USA deaths %+.1f%%", us_d) + fmt(", CAN cases %+.1f%%", ca_c);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"protection table", protection_table},
      {"interval dominance", dominance},
      {"chinese-vaccine sums", chinese_sums},
      {"fixed-effects oracle", fe_oracle},
      {"arma reduction and recovery", arma},
      {"counterfactual fixed point", fixed_point},
      {"counterfactual determinism and bands", determinism_and_bands},
      {"fixture signs and directions", fixture_reproduction},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
