#include "vacstrat/allocation.hpp"

#include <algorithm>
#include <numeric>

#include "vacstrat/errors.hpp"

namespace vacstrat {
namespace {
constexpr double kTieTolerance = 1e-12;
}

void EfficacyProfile::validate() const {
  if (!(ve1 >= 0.0 && ve1 <= ve2 && ve2 <= 1.0)) {
    throw DomainError("efficacy profile requires 0 <= ve1 <= ve2 <= 1");
  }
}

double protection_level(const EfficacyProfile& profile, double f1, double f2) {
  profile.validate();
  if (f1 < 0.0 || f2 < 0.0 || f1 > 1.0) throw DomainError("dose fractions must lie in [0, 1]");
  if (f2 > f1) throw DomainError("fully vaccinated fraction exceeds first-dose fraction");
  return profile.ve1 * f1 + profile.marginal() * f2;
}

std::string_view to_string(SplitRule rule) {
  return rule == SplitRule::EqualSplit ? "equal" : "due-priority";
}

SplitRule parse_split_rule(std::string_view text) {
  if (text == "equal") return SplitRule::EqualSplit;
  if (text == "due-priority") return SplitRule::DuePriority;
  throw DomainError("unknown split rule '" + std::string(text) + "' (expected equal|due-priority)");
}

RolloutSchedule simulate_rollout(double stock, double capacity, int interval_days, int horizon_days,
                                 SplitRule split_rule) {
  if (stock < 0.0 || capacity < 0.0) throw DomainError("stock and capacity must be non-negative");
  if (interval_days < 1) throw DomainError("interval_days must be at least 1");
  if (horizon_days < 0) throw DomainError("horizon_days must be non-negative");

  RolloutSchedule s;
  s.horizon_days = horizon_days;
  s.capacity = capacity;
  s.stock = stock;
  s.interval_days = interval_days;
  s.split_rule = split_rule;
  s.v1.assign(static_cast<std::size_t>(horizon_days) + 1, 0.0);
  s.v2.assign(static_cast<std::size_t>(horizon_days) + 1, 0.0);
  if (capacity * horizon_days < 1.0) {
    s.warnings.push_back("degenerate schedule: capacity x horizon is below one dose per hundred");
  }

  double remaining = stock;
  for (int day = 1; day <= horizon_days; ++day) {
    const auto t = static_cast<std::size_t>(day);
    const double v1_prev = s.v1[t - 1];
    const double v2_prev = s.v2[t - 1];
    // People whose first dose is at least interval_days old and still waiting.
    const double eligible =
        day > interval_days ? std::max(0.0, s.v1[t - static_cast<std::size_t>(interval_days)] - v2_prev) : 0.0;
    const double budget = std::min(capacity, remaining);

    double second = 0.0;
    if (day > interval_days) {
      const double offered = split_rule == SplitRule::EqualSplit ? 0.5 * budget : budget;
      second = std::min(offered, eligible);
    }
    double first = std::min(budget - second, 100.0 - v1_prev);
    first = std::max(first, 0.0);
    // Capacity the first-dose side could not use goes back to second doses.
    const double spare = budget - second - first;
    if (spare > 0.0) second += std::min(spare, eligible - second);

    s.v1[t] = v1_prev + first;
    s.v2[t] = v2_prev + second;
    remaining -= first + second;
  }
  return s;
}

std::vector<double> protection_path(const RolloutSchedule& schedule, const EfficacyProfile& profile) {
  std::vector<double> out(schedule.v1.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    // Guard against 1-ulp overshoot of the cap in long accumulations.
    const double f1 = std::min(schedule.v1[t] / 100.0, 1.0);
    const double f2 = std::min(schedule.v2[t] / 100.0, f1);
    out[t] = protection_level(profile, f1, f2);
  }
  return out;
}

bool DominanceReport::dominates_from(int from_day) const {
  return std::all_of(days.begin(), days.end(),
                     [&](const DayRanking& d) { return d.day < from_day || d.longer_interval_dominates; });
}

DominanceReport dominance_report(std::span<const RolloutSchedule> schedules, const EfficacyProfile& profile) {
  if (schedules.empty()) throw ComparisonError("no schedules to compare");
  for (const auto& s : schedules) {
    if (s.horizon_days != schedules.front().horizon_days) throw ComparisonError("schedules have different horizons");
    if (s.capacity != schedules.front().capacity) throw ComparisonError("schedules have different capacities");
  }
  std::vector<std::vector<double>> paths;
  for (const auto& s : schedules) paths.push_back(protection_path(s, profile));

  std::vector<std::size_t> by_interval(schedules.size());
  std::iota(by_interval.begin(), by_interval.end(), 0);
  std::stable_sort(by_interval.begin(), by_interval.end(), [&](std::size_t a, std::size_t b) {
    return schedules[a].interval_days < schedules[b].interval_days;
  });

  DominanceReport report;
  for (int day = 0; day <= schedules.front().horizon_days; ++day) {
    const auto t = static_cast<std::size_t>(day);
    DayRanking r;
    r.day = day;
    r.order.resize(schedules.size());
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](std::size_t a, std::size_t b) { return paths[a][t] > paths[b][t] + kTieTolerance; });
    for (std::size_t k = 1; k < by_interval.size(); ++k) {
      if (paths[by_interval[k]][t] + kTieTolerance < paths[by_interval[k - 1]][t]) {
        r.longer_interval_dominates = false;
      }
    }
    report.days.push_back(std::move(r));
  }
  return report;
}

}  // namespace vacstrat
