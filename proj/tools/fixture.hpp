#pragma once

#include <cstdint>
#include <string>

#include "vacstrat/date.hpp"
#include "vacstrat/ingest.hpp"

namespace vacstrat::fixture {

// Deterministic 37-country synthetic data generated from the structural
// equations: first doses lower case growth, second doses have no effect,
// Chinese-vaccine countries get no first-dose effect, mobility raises case
// growth, deaths follow cases with a 14-day delay. USA uses a 3-week dosing
// interval, GBR 12 weeks and CAN 16 weeks.
struct Options {
  std::uint64_t seed = 7;
  Date first = Date::from_ymd(2020, 5, 1);
  Date last = Date::from_ymd(2021, 7, 8);
};

// Raw CSV with logical column names.
std::string raw_csv(const Options& options = {});
// raw_csv passed through parse_raw and build_panel.
ObservationPanel panel(const Options& options = {});
// Estimation window used with the fixture.
DateRange window();

}  // namespace vacstrat::fixture
