#include "doctest.h"

#include <array>
#include <random>

#include "oracles.hpp"
#include "vacstrat/allocation.hpp"
#include "vacstrat/errors.hpp"

using namespace vacstrat;

TEST_CASE("protection level matches the vaccine allocation table") {
  const EfficacyProfile strong{0.90, 0.95};
  const EfficacyProfile weak{0.50, 0.95};
  const std::array<std::array<double, 2>, 5> rows = {{{0.70, 0.0}, {0.60, 0.10}, {0.50, 0.20}, {0.40, 0.30}, {0.35, 0.35}}};
  const std::array<double, 5> strong_cells = {0.630, 0.545, 0.460, 0.375, 0.3325};
  const std::array<double, 5> weak_cells = {0.350, 0.345, 0.340, 0.335, 0.3325};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(protection_level(strong, rows[i][0], rows[i][1]) == doctest::Approx(strong_cells[i]).epsilon(1e-12));
    CHECK(protection_level(weak, rows[i][0], rows[i][1]) == doctest::Approx(weak_cells[i]).epsilon(1e-12));
  }
  CHECK(protection_level(strong, 0.0, 0.0) == 0.0);
}

TEST_CASE("protection level rejects bad inputs") {
  CHECK_THROWS_AS(protection_level({0.9, 0.95}, 0.2, 0.3), DomainError);
  CHECK_THROWS_AS(protection_level({0.9, 0.95}, 1.2, 0.0), DomainError);
  CHECK_THROWS_AS(protection_level({0.96, 0.95}, 0.2, 0.1), DomainError);
  CHECK_THROWS_AS(protection_level({0.5, 1.1}, 0.2, 0.1), DomainError);
}

TEST_CASE("equal split schedule agrees with a queue simulation") {
  const double cap = 100.0 / 120.0;
  for (int interval : {21, 28, 60, 90, 120}) {
    const auto s = simulate_rollout(100.0, cap, interval, 120);
    const auto q = oracle::queue_rollout(100.0, cap, interval, 120);
    for (std::size_t t = 0; t < s.v1.size(); ++t) {
      CHECK(s.v1[t] == doctest::Approx(q.v1[t]).epsilon(1e-12));
      CHECK(s.v2[t] == doctest::Approx(q.v2[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("three-week interval end state") {
  const double cap = 100.0 / 120.0;
  const auto s = simulate_rollout(100.0, cap, 21, 120);
  CHECK(s.v2[120] == doctest::Approx(0.5 * cap * 99).epsilon(1e-12));
  CHECK(s.v1[120] == doctest::Approx(s.v1[21] + 0.5 * cap * 99).epsilon(1e-12));
  CHECK(s.v1[120] + s.v2[120] == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("four-month interval gives everything to first doses") {
  const auto s = simulate_rollout(100.0, 100.0 / 120.0, 120, 120);
  CHECK(s.v1[120] == doctest::Approx(100.0));
  CHECK(s.v2[120] == 0.0);
  const auto p = protection_path(s, {0.90, 0.95});
  CHECK(p[120] == doctest::Approx(0.90));
}

TEST_CASE("schedule invariants hold for random inputs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double stock = 150.0 * u(rng);
    const double cap = 0.05 + 2.0 * u(rng);
    const int interval = 1 + static_cast<int>(100 * u(rng));
    const int horizon = 1 + static_cast<int>(200 * u(rng));
    const auto rule = u(rng) < 0.5 ? SplitRule::EqualSplit : SplitRule::DuePriority;
    const auto s = simulate_rollout(stock, cap, interval, horizon, rule);
    for (std::size_t t = 1; t < s.v1.size(); ++t) {
      CHECK(s.v1[t] >= s.v1[t - 1]);
      CHECK(s.v2[t] >= s.v2[t - 1]);
      CHECK(s.v2[t] <= s.v1[t] + 1e-12);
      CHECK(s.v1[t] <= 100.0 + 1e-9);
      CHECK((s.v1[t] - s.v1[t - 1]) + (s.v2[t] - s.v2[t - 1]) <= cap + 1e-12);
    }
    CHECK(s.v1.back() + s.v2.back() <= stock + 1e-9);
  }
}

TEST_CASE("zero stock and degenerate capacity") {
  const auto s = simulate_rollout(0.0, 1.0, 21, 50);
  for (double v : s.v1) CHECK(v == 0.0);
  const auto d = simulate_rollout(10.0, 0.001, 21, 10);
  CHECK(d.warnings.size() == 1);
}

TEST_CASE("equal efficacies make the path depend on first doses only") {
  const EfficacyProfile flat{0.7, 0.7};
  const auto a = simulate_rollout(100.0, 1.0, 21, 90);
  const auto pa = protection_path(a, flat);
  for (std::size_t t = 0; t < pa.size(); ++t) CHECK(pa[t] == doctest::Approx(0.7 * a.v1[t] / 100.0));
}

TEST_CASE("longer intervals dominate after the first interval") {
  const double cap = 100.0 / 120.0;
  std::vector<RolloutSchedule> s = {simulate_rollout(100, cap, 21, 120), simulate_rollout(100, cap, 90, 120),
                                    simulate_rollout(100, cap, 120, 120)};
  for (const EfficacyProfile& prof : {EfficacyProfile{0.9, 0.95}, EfficacyProfile{0.5, 0.95}}) {
    const auto r = dominance_report(s, prof);
    CHECK(r.dominates_from(22));
    CHECK(r.days[120].order.front() == 2);
  }
  std::vector<RolloutSchedule> bad = {simulate_rollout(100, cap, 21, 120), simulate_rollout(100, cap, 21, 100)};
  CHECK_THROWS_AS(dominance_report(bad, {0.9, 0.95}), ComparisonError);
}

TEST_CASE("split rule names") {
  CHECK(parse_split_rule("equal") == SplitRule::EqualSplit);
  CHECK(parse_split_rule(to_string(SplitRule::DuePriority)) == SplitRule::DuePriority);
  CHECK_THROWS_AS(parse_split_rule("half"), DomainError);
}
