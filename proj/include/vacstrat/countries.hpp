#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vacstrat/date.hpp"

namespace vacstrat {

enum class WeekendConvention { FriSat, SatSun };

struct CountryMeta {
  std::string id;    // ISO 3166-1 alpha-3
  std::string name;  // display name
  WeekendConvention weekend = WeekendConvention::SatSun;
  bool chinese_vaccine = false;           // baseline set
  bool extended_chinese_vaccine = false;  // baseline plus HUN, MEX, COL
};

// Case-insensitive exact lookup against the bundled alias table; throws
// MetadataError for unknown names. No fuzzy matching.
std::string canonical_country(std::string_view name);

const CountryMeta& country_meta(std::string_view id);
const std::vector<CountryMeta>& all_countries();

// The 37-country daily panel used for the multi-country regressions.
const std::vector<std::string>& default_panel_countries();

bool is_weekend(WeekendConvention convention, Date date);
// 1 iff `date` falls on the country's weekend.
int weekend_flag(std::string_view country, Date date);

}  // namespace vacstrat
