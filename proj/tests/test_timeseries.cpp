#include "doctest.h"

#include <cmath>
#include <random>

#include "fixture.hpp"
#include "oracles.hpp"
#include "vacstrat/errors.hpp"
#include "vacstrat/timeseries.hpp"

using namespace vacstrat;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ts::TsDesign sim_design(std::uint64_t seed, int n, std::vector<double> phi, std::vector<double> theta) {
  auto s = oracle::simulate_armax(seed, n, phi, theta, 0.1, {0.5, -0.3});
  return ts::make_design(s.y, s.x, {"x1", "x2"});
}

}  // namespace

TEST_CASE("white-noise errors reduce to least squares") {
  auto s = oracle::simulate_armax(3, 400, {}, {}, 0.2, {1.0, -2.0});
  const auto d = ts::make_design(s.y, s.x, {"a", "b"});
  const auto fit = ts::fit_arimax(d, {0, 1, 0});
  MatrixXd z(400, 3);
  z << VectorXd::Ones(400), s.x;
  const VectorXd b = z.householderQr().solve(s.y);
  REQUIRE(fit.regression.size() == 3);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.regression[static_cast<std::size_t>(j)].value - b[j]) < 1e-8);
  const double ssr = (s.y - z * b).squaredNorm();
  CHECK(fit.sigma2 == doctest::Approx(ssr / 400).epsilon(1e-8));
  CHECK(fit.regression[0].name == "c");
}

TEST_CASE("arma(1,1) estimates land near the truth") {
  int inside = 0;
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto d = sim_design(seed, 2000, {0.5}, {0.3});
    const auto fit = ts::fit_arimax(d, {1, 1, 1});
    CHECK(fit.converged);
    CHECK(fit.stationary_invertible);
    const bool ok = std::abs(fit.ar[0].value - 0.5) < 3 * fit.ar[0].se &&
                    std::abs(fit.ma[0].value - 0.3) < 3 * fit.ma[0].se &&
                    std::abs(fit.regression[1].value - 0.5) < 3 * fit.regression[1].se;
    inside += ok ? 1 : 0;
  }
  CHECK(inside >= 9);
}

TEST_CASE("likelihood skips invalid rows") {
  auto d = sim_design(5, 300, {0.4}, {});
  const auto full = ts::fit_arimax(d, {1, 1, 0});
  d.valid[150] = 0;
  const auto gap = ts::fit_arimax(d, {1, 1, 0});
  CHECK(gap.n_obs == full.n_obs - 1);
  CHECK(std::isnan(gap.residuals[150]));
  CHECK(gap.ar[0].value == doctest::Approx(full.ar[0].value).epsilon(0.05));
}

TEST_CASE("order search picks a strong ar(2)") {
  const auto d = sim_design(42, 1500, {0.6, -0.3}, {});
  const auto sel = ts::select_order(d, 3, 3, {}, 4);
  CHECK(sel.order == ts::ArimaOrder{2, 1, 0});
  CHECK(sel.candidates.size() == 16);
  const auto serial = ts::select_order(d, 3, 3, {}, 1);
  CHECK(serial.fit.aicc == sel.fit.aicc);
}

TEST_CASE("order search fails when nothing fits") {
  const auto d = ts::make_design(VectorXd::Zero(3), MatrixXd::Zero(3, 0), {});
  CHECK_THROWS_AS(ts::select_order(d, 1, 1), SelectionError);
}

TEST_CASE("collinear regressors are a design error") {
  auto s = oracle::simulate_armax(9, 200, {}, {}, 0.0, {1.0});
  MatrixXd x(200, 2);
  x << s.x, 2.0 * s.x;
  CHECK_THROWS_AS(ts::fit_arimax(ts::make_design(s.y, x, {"a", "b"}), {0, 1, 0}), DesignError);
}

TEST_CASE("ar polynomial roots") {
  const std::vector<double> one = {0.5};
  CHECK(ts::min_root_modulus(one) == doctest::Approx(2.0));
  const std::vector<double> two = {0.5, 0.3};
  CHECK(ts::min_root_modulus(two) == doctest::Approx((-0.5 + std::sqrt(1.45)) / 0.6));
  CHECK(std::isinf(ts::min_root_modulus(std::vector<double>{})));
}

TEST_CASE("ljung-box statistic") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::vector<double> e(300);
  for (auto& v : e) v = z(rng);
  double mean = 0.0;
  for (double v : e) mean += v / 300.0;
  double denom = 0.0;
  for (double v : e) denom += (v - mean) * (v - mean);
  double q = 0.0;
  for (int k = 1; k <= 7; ++k) {
    double num = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < e.size(); ++t)
      num += (e[t] - mean) * (e[t - static_cast<std::size_t>(k)] - mean);
    const double r = num / denom;
    q += r * r / (300.0 - k);
  }
  q *= 300.0 * 302.0;
  const auto lb = ts::ljung_box(e, 7, 2);
  CHECK(lb.statistic == doctest::Approx(q).epsilon(1e-12));
  CHECK(lb.df == 5);
  CHECK(lb.p_value > 0.0);
  CHECK(lb.p_value < 1.0);
}

TEST_CASE("fitted path accumulates from the initial level") {
  const auto d = sim_design(8, 300, {0.3}, {});
  const auto fit = ts::fit_arimax(d, {1, 1, 0});
  const auto path = ts::fitted_path(fit, d);
  REQUIRE(path.size() == 300);
  const auto diag = ts::residual_diagnostics(fit);
  CHECK(diag.n == 300);
  CHECK(diag.ljung_box.size() == 2);
  CHECK(diag.white_noise);
}

TEST_CASE("fixture country design") {
  const auto p = fixture::panel();
  const auto d = ts::build_ts_design(p, "CAN", ts::Outcome::Cases);
  CHECK(d.names.size() == 6);
  CHECK(d.usable_rows() > 300);
  const auto lags = ts::LagSpec::parse("v1=28,p=21", ts::LagSpec::defaults(ts::Outcome::Cases));
  CHECK(lags.v1 == 28);
  CHECK(lags.policy == 21);
  CHECK(ts::LagSpec::defaults(ts::Outcome::Deaths).v1 == 35);
  const auto fit = ts::fit_arimax(d, {1, 1, 1});
  const auto j = ts::to_json(fit);
  CHECK(j.contains("aicc"));
}
