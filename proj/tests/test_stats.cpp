#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "vacstrat/errors.hpp"
#include "vacstrat/linalg.hpp"
#include "vacstrat/parallel.hpp"
#include "vacstrat/stats.hpp"

using namespace vacstrat;

TEST_CASE("distribution tails") {
  CHECK(stats::t_two_sided_p(2.0, 10) == doctest::Approx(0.073388034770740).epsilon(1e-10));
  CHECK(stats::normal_two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(stats::normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-14));
  CHECK(stats::chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(std::string(stats::stars(0.005)) == "***");
  CHECK(std::string(stats::stars(0.04)) == "**");
  CHECK(std::string(stats::stars(0.2)).empty());
}

TEST_CASE("sample summaries") {
  const std::vector<double> v = {4, 1, 3, 2};
  CHECK(stats::quantile(v, 0.25) == doctest::Approx(1.75));
  CHECK(stats::quantile(v, 1.0) == 4);
  CHECK(stats::mean(v) == 2.5);
  CHECK(stats::variance(v) == doctest::Approx(1.25));
}

TEST_CASE("least squares and rank detection") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 2, 3, 1, 0, 1, 1, 5, 6, 1, 1, 2;
  const std::vector<std::string> names = {"a", "b", "c"};
  const auto dep = linalg::dependent_columns(x, names);
  CHECK(dep.size() == 3);  // c = a + b
  CHECK_THROWS_AS(linalg::least_squares(x, Eigen::VectorXd::Ones(4), names), RankError);
  Eigen::MatrixXd y = x.leftCols(2);
  const std::vector<std::string> two = {"a", "b"};
  Eigen::VectorXd target(4);
  target << 5, 1, 11, 3;  // 1 + 2b
  const auto ls = linalg::least_squares(y, target, two);
  CHECK(ls.coef[0] == doctest::Approx(1.0));
  CHECK(ls.coef[1] == doctest::Approx(2.0));
  CHECK(ls.residuals.norm() < 1e-12);
}

TEST_CASE("psd factor repairs small negative eigenvalues") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 1.0 + 1e-9, 1.0 + 1e-9, 1.0;
  bool clipped = false;
  const auto l = linalg::psd_factor(a, &clipped);
  CHECK(clipped);
  Eigen::MatrixXd b(2, 2);
  b << 2.0, 0.5, 0.5, 1.0;
  const auto m = linalg::psd_factor(b);
  CHECK(((m * m.transpose()) - b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS(parallel_for(10, 4, [](std::size_t i) {
    if (i == 3) throw std::runtime_error("x");
  }));
}
