#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace vacstrat {

// Calendar day stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  // Strict YYYY-MM-DD; throws ParseError.
  static Date parse(std::string_view text);

  std::string to_string() const;
  constexpr int days() const { return days_; }

  // ISO weekday: 1 = Monday ... 7 = Sunday.
  unsigned iso_weekday() const;

  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr Date& operator++() {
    ++days_;
    return *this;
  }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  int days_ = 0;
};

struct DateRange {
  Date first;
  Date last;  // inclusive

  int num_days() const { return last - first + 1; }
  bool contains(Date d) const { return d >= first && d <= last; }
};

}  // namespace vacstrat
