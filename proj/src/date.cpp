#include "vacstrat/date.hpp"

#include <charconv>
#include <cstdio>

#include "vacstrat/errors.hpp"

namespace vacstrat {

namespace chr = std::chrono;

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) {
    throw ParseError("invalid calendar date " + std::to_string(year) + "-" +
                     std::to_string(month) + "-" + std::to_string(day));
  }
  return Date(static_cast<int>(chr::sys_days{ymd}.time_since_epoch().count()));
}

Date Date::parse(std::string_view text) {
  auto field = [&](std::size_t pos, std::size_t len) {
    int value = 0;
    const char* first = text.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, value);
    if (ec != std::errc{} || ptr != first + len) {
      throw ParseError("malformed date '" + std::string(text) + "'");
    }
    return value;
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw ParseError("malformed date '" + std::string(text) + "'");
  }
  return from_ymd(field(0, 4), static_cast<unsigned>(field(5, 2)),
                  static_cast<unsigned>(field(8, 2)));
}

std::string Date::to_string() const {
  const chr::year_month_day ymd{chr::sys_days{chr::days{days_}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

unsigned Date::iso_weekday() const {
  return chr::weekday{chr::sys_days{chr::days{days_}}}.iso_encoding();
}

}  // namespace vacstrat
