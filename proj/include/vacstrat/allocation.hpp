#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vacstrat {

// First-dose and full-regimen efficacy, as fractions.
struct EfficacyProfile {
  double ve1 = 0.0;
  double ve2 = 0.0;

  // Throws DomainError unless 0 <= ve1 <= ve2 <= 1.
  void validate() const;
  double marginal() const { return ve2 - ve1; }
};

// Average protection ve1 * f1 + (ve2 - ve1) * f2 where f1 is the fraction with
// at least one dose and f2 the fully vaccinated fraction (f2 <= f1).
double protection_level(const EfficacyProfile& profile, double f1, double f2);

enum class SplitRule {
  EqualSplit,   // half of daily capacity offered to second doses
  DuePriority,  // every eligible second dose first, remainder to first doses
};
std::string_view to_string(SplitRule rule);
SplitRule parse_split_rule(std::string_view text);

// Per-day cumulative coverage per hundred; index 0 is the day before rollout.
struct RolloutSchedule {
  int horizon_days = 0;
  double capacity = 0.0;
  double stock = 0.0;
  int interval_days = 0;
  SplitRule split_rule = SplitRule::EqualSplit;
  std::vector<double> v1;  // size horizon_days + 1
  std::vector<double> v2;
  std::vector<std::string> warnings;
};

RolloutSchedule simulate_rollout(double stock, double capacity, int interval_days, int horizon_days,
                                 SplitRule split_rule = SplitRule::EqualSplit);

// protection_level applied day by day with f = coverage / 100.
std::vector<double> protection_path(const RolloutSchedule& schedule, const EfficacyProfile& profile);

struct DayRanking {
  int day = 0;
  std::vector<std::size_t> order;  // schedule indices, best first
  bool longer_interval_dominates = true;
};

struct DominanceReport {
  std::vector<DayRanking> days;  // days 0..horizon
  // True iff longer intervals weakly dominate on every day >= from_day.
  bool dominates_from(int from_day) const;
};

DominanceReport dominance_report(std::span<const RolloutSchedule> schedules, const EfficacyProfile& profile);

}  // namespace vacstrat
