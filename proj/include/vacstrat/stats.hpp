#pragma once

#include <span>
#include <vector>

namespace vacstrat::stats {

// Two-sided p-value of a t statistic with `df` degrees of freedom.
double t_two_sided_p(double t, double df);
double normal_two_sided_p(double z);
double normal_quantile(double p);
// Upper tail of chi-square(df).
double chi2_sf(double x, double df);

// Sample quantile with linear interpolation between order statistics
// (the usual "type 7" definition).
double quantile(std::span<const double> values, double prob);

double mean(std::span<const double> values);
// Population (1/n) variance.
double variance(std::span<const double> values);

// Significance stars at the 90/95/99% levels.
const char* stars(double p_value);

}  // namespace vacstrat::stats
