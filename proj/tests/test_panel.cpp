#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "fixture.hpp"
#include "oracles.hpp"
#include "vacstrat/errors.hpp"
#include "vacstrat/panel.hpp"

using namespace vacstrat;
using namespace vacstrat::panel;

namespace {

const ObservationPanel& fixture_panel() {
  static const ObservationPanel p = fixture::panel();
  return p;
}

PanelSpec baseline(Outcome o, int trend = 2) {
  PanelSpec s;
  s.outcome = o;
  s.trend = trend;
  s.chinese_terms = true;
  s.window = fixture::window();
  return s;
}

}  // namespace

TEST_CASE("within estimator equals dummy-variable least squares") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 6; ++trial) {
    const auto d = oracle::random_design(rng, 6, 60, 3, trial % 3);
    const auto fit = fit_fe_ols(d);
    const auto o = oracle::dummy_ols(d);
    const auto cov = oracle::naive_cluster_cov(o, d.cluster, d.countries.size());
    for (int k = 0; k < 3; ++k) {
      CHECK(std::abs(fit.coef[k] - o.slopes[k]) < 1e-9);
      CHECK(std::abs(std::sqrt(fit.covariance(k, k)) - std::sqrt(cov(k, k))) < 1e-10);
    }
    CHECK((fit.residuals - o.residuals).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("country shifts leave slopes unchanged") {
  std::mt19937_64 rng(5);
  auto d = oracle::random_design(rng, 5, 40, 2, 1);
  const auto a = fit_fe_ols(d);
  for (Eigen::Index i = 0; i < d.y.size(); ++i) d.y[i] += 3.0 * static_cast<double>(d.cluster[static_cast<std::size_t>(i)]) - 7.0;
  const auto b = fit_fe_ols(d);
  CHECK((a.coef - b.coef).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.covariance - b.covariance).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(b.country_effects.at("C1")[0] - a.country_effects.at("C1")[0] == doctest::Approx(3.0 - 7.0));
}

TEST_CASE("one cluster disables inference") {
  std::mt19937_64 rng(6);
  auto d = oracle::random_design(rng, 1, 40, 2, 0);
  const auto fit = fit_fe_ols(d);
  CHECK_FALSE(fit.inference);
  CHECK(std::isnan(fit.covariance(0, 0)));
  CHECK(fit.warnings.size() == 1);
}

TEST_CASE("dependent columns are named") {
  std::mt19937_64 rng(7);
  auto d = oracle::random_design(rng, 4, 30, 2, 0);
  d.x.col(1) = 2.0 * d.x.col(0);
  try {
    fit_fe_ols(d);
    FAIL("expected a rank error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x1") != std::string::npos);
  }
}

TEST_CASE("linear combinations") {
  std::mt19937_64 rng(8);
  const auto fit = fit_fe_ols(oracle::random_design(rng, 5, 40, 3, 0));
  const auto one = linear_combo(fit, {{"x1", 1.0}});
  CHECK(one.estimate == fit.coef[1]);
  CHECK(one.se == doctest::Approx(std::sqrt(fit.covariance(1, 1))).epsilon(1e-14));
  const auto sum = linear_combo(fit, {{"x0", 1.0}, {"x2", 1.0}});
  CHECK(sum.estimate == doctest::Approx(fit.coef[0] + fit.coef[2]));
  CHECK(sum.se == doctest::Approx(std::sqrt(fit.covariance(0, 0) + fit.covariance(2, 2) + 2 * fit.covariance(0, 2))));
  CHECK_THROWS_AS(linear_combo(fit, {{"x9", 1.0}}), LookupError);
}

TEST_CASE("published coefficient sums") {
  const std::vector<std::string> names = {"V1", "V1_CHN"};
  Eigen::VectorXd b(2);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(2, 2);
  b << -0.0077, 0.0149;
  CHECK(std::round(linear_combo(names, b, v, {{"V1", 1}, {"V1_CHN", 1}}).estimate * 1e4) / 1e4 ==
        doctest::Approx(0.0072));
  b << 0.0024, -0.0138;
  CHECK(std::round(linear_combo(names, b, v, {{"V1", 1}, {"V1_CHN", 1}}).estimate * 1e4) / 1e4 ==
        doctest::Approx(-0.0114));
}

TEST_CASE("equation terms") {
  auto names = [](const PanelSpec& s) {
    std::vector<std::string> out;
    for (const auto& t : equation_terms(s)) out.push_back(t.name);
    return out;
  };
  PanelSpec c;
  CHECK(names(c) == std::vector<std::string>{"V1_L21", "V2_L7", "P_L14", "M_L14", "dlogdC_L14", "logdC_L14", "dlogdT"});
  PanelSpec d;
  d.outcome = Outcome::Deaths;
  d.lag_shift = 2;
  CHECK(names(d).front() == "V1_L37");
  CHECK(names(d).size() == 6);
  PanelSpec m;
  m.outcome = Outcome::Mobility;
  m.info = InfoVariable::Deaths;
  m.chinese_terms = true;
  const auto mn = names(m);
  CHECK(mn.size() == 13);
  CHECK(std::find(mn.begin(), mn.end(), "logdD") != mn.end());
}

TEST_CASE("fixture designs keep the expected rows per country") {
  const auto cases = build_panel_design(fixture_panel(), baseline(Outcome::Cases));
  const auto deaths = build_panel_design(fixture_panel(), baseline(Outcome::Deaths));
  const auto mob = build_panel_design(fixture_panel(), baseline(Outcome::Mobility, 0));
  CHECK(cases.countries.size() == 37);
  CHECK(cases.n_rows() == 37 * 382);
  CHECK(deaths.n_rows() == 37 * 368);
  CHECK(mob.n_rows() == 37 * 396);
  for (const auto& [id, drop] : cases.drops) CHECK(drop.usable == 382);
}

TEST_CASE("regressor values follow their definitions") {
  const auto& p = fixture_panel();
  const auto bank = make_bank(p, *p.country_index("GBR"), ChineseSet::Baseline);
  const std::size_t t = 300;
  for (const auto& term : equation_terms(baseline(Outcome::Cases))) {
    const double v = evaluate(term, bank, t, 0, 1);
    if (term.name == "V1_L21") CHECK(v == bank[Series::V1][t - 21]);
    if (term.name == "dlogdC_L14") CHECK(v == doctest::Approx(bank[Series::LC][t - 14] - bank[Series::LC][t - 21]));
    if (term.name == "V1_CHN_L21") CHECK(v == 0.0);
  }
  const auto& s = p.at("GBR");
  double sum = 0.0;
  for (std::size_t j = 0; j < 7; ++j) sum += s[PanelColumn::NewCasesPm][t - j];
  CHECK(bank[Series::LC][t] == doctest::Approx(std::log(sum)));
  CHECK(std::isnan(evaluate(equation_terms(baseline(Outcome::Cases))[0], bank, t, t - 5, 1)));
  CHECK(evaluate_outcome(Outcome::Cases, bank, t, 0, 1) == doctest::Approx(bank[Series::LC][t] - bank[Series::LC][t - 7]));
}

TEST_CASE("fixture signs") {
  for (int trend = 0; trend <= 3; ++trend) {
    const auto fit = fit_fe_ols(build_panel_design(fixture_panel(), baseline(Outcome::Cases, trend)));
    const auto tab = fit.table();
    CHECK(tab[*fit.index_of("V1_L21")].estimate < 0);
    CHECK(tab[*fit.index_of("V1_L21")].p_value < 0.01);
    CHECK(tab[*fit.index_of("V2_L7")].p_value > 0.10);
    CHECK(fit.obs_per_country == 382);
  }
}

TEST_CASE("weekly panel needs weekly lags") {
  const auto weekly = weekly_aggregate(fixture_panel()).panel;
  auto spec = baseline(Outcome::Cases, 1);
  spec.frequency = Frequency::Weekly;
  const auto d = build_panel_design(weekly, spec);
  CHECK(d.n_rows() > 0);
  spec.lag_shift = 3;
  CHECK_THROWS_AS(build_panel_design(weekly, spec), BuildError);
  auto daily_spec = baseline(Outcome::Cases);
  CHECK_THROWS_AS(build_panel_design(weekly, daily_spec), BuildError);
}

TEST_CASE("empty design reports drops") {
  auto spec = baseline(Outcome::Cases);
  spec.window = DateRange{Date::parse("2020-05-01"), Date::parse("2020-05-10")};
  CHECK_THROWS_AS(build_panel_design(fixture_panel(), spec), BuildError);
}

TEST_CASE("spec and fit serialise") {
  auto spec = baseline(Outcome::Mobility, 1);
  spec.info = InfoVariable::Deaths;
  spec.interactions = false;
  const auto back = spec_from_json(to_json(spec));
  CHECK(back.label() == spec.label());
  CHECK(to_json(back) == to_json(spec));

  const auto fit = fit_fe_ols(build_panel_design(fixture_panel(), spec));
  const auto j = to_json(fit);
  const auto f2 = fit_from_json(nlohmann::json::parse(j.dump()));
  CHECK((f2.coef - fit.coef).cwiseAbs().maxCoeff() == 0.0);
  CHECK((f2.covariance - fit.covariance).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f2.country_component("USA", 0.5) == fit.country_component("USA", 0.5));
  std::ostringstream csv;
  write_coefficient_csv(fit, csv);
  CHECK(csv.str().rfind("name,estimate,cluster_se,t,p,stars\n", 0) == 0);
}

TEST_CASE("battery keeps going past failures") {
  BatteryOptions opt;
  opt.trends = {1};
  opt.lag_shifts = {-1, 0, 1};
  opt.windows = {DateRange{Date::parse("2020-05-01"), Date::parse("2020-05-10")}};
  opt.weekly = true;
  const auto entries = run_spec_battery(fixture_panel(), baseline(Outcome::Cases, 0), opt, 4);
  REQUIRE(entries.size() == 6);
  CHECK(entries[0].fit.has_value());
  int failed = 0;
  for (const auto& e : entries) failed += e.fit ? 0 : 1;
  CHECK(failed == 1);
  std::ostringstream out;
  write_battery_csv(entries, out);
  CHECK(!out.str().empty());
}
