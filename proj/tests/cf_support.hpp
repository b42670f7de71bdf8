#pragma once

#include <string>
#include <vector>

#include "vacstrat/counterfactual.hpp"
#include "vacstrat/ingest.hpp"
#include "vacstrat/panel.hpp"

namespace cfsupport {

struct Fits {
  vacstrat::ObservationPanel panel;
  vacstrat::panel::PanelFit cases, deaths, mobility_cases, mobility_deaths;
};

// Fixture panel with the four equations estimated on the fixture window.
const Fits& fixture_fits();

// Copies of the fits turned into a model that is linear in the vaccine
// coefficients: only V1/V2 carry covariance, the lagged outcome terms are
// zero and mobility ignores vaccination and information variables.
struct LinearModel {
  vacstrat::panel::PanelFit outcome, mobility;
};
LinearModel linear_model(const Fits& f);

// Exposure g_t with delta_t = g_t' (b_V1, b_V2) for the linear model.
std::vector<std::array<double, 2>> exposure(const vacstrat::ObservationPanel& panel, const std::string& country,
                                            const vacstrat::cf::CfSchedule& s, int lag_v1, int lag_v2);

}  // namespace cfsupport
