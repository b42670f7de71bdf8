#include "vacstrat/countries.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "vacstrat/errors.hpp"

namespace vacstrat {
namespace {

struct Entry {
  const char* id;
  const char* name;
  std::vector<const char*> aliases;
  WeekendConvention weekend = WeekendConvention::SatSun;
  bool chinese = false;
  bool extended = false;
};

const std::vector<Entry>& entries() {
  using W = WeekendConvention;
  static const std::vector<Entry> table = {
      {"AUS", "Australia", {}},
      {"AUT", "Austria", {}},
      {"BEL", "Belgium", {}},
      {"BGR", "Bulgaria", {}},
      {"BHR", "Bahrain", {}, W::FriSat, true, true},
      {"CAN", "Canada", {}},
      {"CHE", "Switzerland", {}},
      {"CHL", "Chile", {}, W::SatSun, true, true},
      {"COL", "Colombia", {}, W::SatSun, false, true},
      {"DEU", "Germany", {}},
      {"DNK", "Denmark", {}},
      {"ESP", "Spain", {}},
      {"EST", "Estonia", {}},
      {"FIN", "Finland", {}},
      {"FRA", "France", {}},
      {"GBR", "United Kingdom", {"UK", "Great Britain", "Britain"}},
      {"GRC", "Greece", {}},
      {"HRV", "Croatia", {}},
      {"HUN", "Hungary", {}, W::SatSun, false, true},
      {"ISR", "Israel", {}, W::FriSat},
      {"ITA", "Italy", {}},
      {"JPN", "Japan", {}},
      {"KOR", "South Korea", {"Korea", "Republic of Korea", "Korea, South", "Korea, Rep."}},
      {"LTU", "Lithuania", {}},
      {"LUX", "Luxembourg", {}},
      {"LVA", "Latvia", {}},
      {"MEX", "Mexico", {}, W::SatSun, false, true},
      {"MLT", "Malta", {}},
      {"NOR", "Norway", {}},
      {"NZL", "New Zealand", {}},
      {"POL", "Poland", {}},
      {"PRT", "Portugal", {}},
      {"ROU", "Romania", {}},
      {"SVN", "Slovenia", {}},
      {"TUR", "Turkey", {"Turkiye"}, W::SatSun, true, true},
      {"URY", "Uruguay", {}, W::SatSun, true, true},
      {"USA", "United States", {"US", "United States of America", "U.S."}},
      // Outside the 37-country daily panel.
      {"ARE", "United Arab Emirates", {"UAE"}, W::FriSat},
      {"CRI", "Costa Rica", {}},
      {"CYP", "Cyprus", {}},
      {"ISL", "Iceland", {}},
      {"NLD", "Netherlands", {"The Netherlands"}},
      {"CZE", "Czechia", {"Czech Republic"}},
      {"SVK", "Slovakia", {"Slovak Republic"}},
      {"SWE", "Sweden", {}},
      {"IRL", "Ireland", {}},
  };
  return table;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

const std::map<std::string, std::string>& alias_index() {
  static const std::map<std::string, std::string> index = [] {
    std::map<std::string, std::string> m;
    for (const auto& e : entries()) {
      m.emplace(lower(e.id), e.id);
      m.emplace(lower(e.name), e.id);
      for (const char* a : e.aliases) m.emplace(lower(a), e.id);
    }
    return m;
  }();
  return index;
}

}  // namespace

std::string canonical_country(std::string_view name) {
  std::string key = lower(name);
  while (!key.empty() && std::isspace(static_cast<unsigned char>(key.back()))) key.pop_back();
  while (!key.empty() && std::isspace(static_cast<unsigned char>(key.front()))) key.erase(0, 1);
  const auto& index = alias_index();
  if (auto it = index.find(key); it != index.end()) return it->second;
  throw MetadataError("unknown country '" + std::string(name) + "'");
}

const std::vector<CountryMeta>& all_countries() {
  static const std::vector<CountryMeta> metas = [] {
    std::vector<CountryMeta> out;
    for (const auto& e : entries()) {
      out.push_back({e.id, e.name, e.weekend, e.chinese, e.extended});
    }
    return out;
  }();
  return metas;
}

const CountryMeta& country_meta(std::string_view id) {
  for (const auto& m : all_countries()) {
    if (m.id == id) return m;
  }
  throw MetadataError("no metadata for country '" + std::string(id) + "'");
}

const std::vector<std::string>& default_panel_countries() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> out;
    for (const auto& e : entries()) {
      if (std::string_view(e.id) == "ARE") break;
      out.emplace_back(e.id);
    }
    return out;
  }();
  return ids;
}

bool is_weekend(WeekendConvention convention, Date date) {
  const unsigned wd = date.iso_weekday();
  if (convention == WeekendConvention::FriSat) return wd == 5 || wd == 6;
  return wd == 6 || wd == 7;
}

int weekend_flag(std::string_view country, Date date) {
  return is_weekend(country_meta(country).weekend, date) ? 1 : 0;
}

}  // namespace vacstrat
