#include "vacstrat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "vacstrat/errors.hpp"

namespace vacstrat::stats {

double t_two_sided_p(double t, double df) {
  if (!std::isfinite(t) || !(df > 0)) return std::numeric_limits<double>::quiet_NaN();
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

double normal_two_sided_p(double z) {
  if (!std::isfinite(z)) return std::numeric_limits<double>::quiet_NaN();
  boost::math::normal dist;
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(z)));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

double chi2_sf(double x, double df) {
  if (!std::isfinite(x) || !(df > 0)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

double quantile(std::span<const double> values, double prob) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : values) s += x;
  return s / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(values);
  double s = 0.0;
  for (double x : values) s += (x - m) * (x - m);
  return s / static_cast<double>(values.size());
}

const char* stars(double p) {
  if (!(p == p)) return "";
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.10) return "*";
  return "";
}

}  // namespace vacstrat::stats
