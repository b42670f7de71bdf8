#include "vacstrat/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "vacstrat/errors.hpp"
#include "vacstrat/linalg.hpp"
#include "vacstrat/optim.hpp"
#include "vacstrat/parallel.hpp"
#include "vacstrat/stats.hpp"

namespace vacstrat::ts {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kCountFloor = 0.5;
constexpr int kMinUsableRows = 60;
constexpr double kRootMargin = 1e-6;
// Order search skips fits whose roots sit this close to the unit circle.
constexpr double kSelectionRootMin = 1.01;
constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Partial autocorrelation reparameterisation.

// Maps unconstrained values to coefficients c of a polynomial
// 1 - c_1 z - ... - c_k z^k with all roots outside the unit circle.
std::vector<double> to_stationary(std::span<const double> raw) {
  const std::size_t k = raw.size();
  std::vector<double> c(k), work(k);
  for (std::size_t j = 0; j < k; ++j) {
    const double r = std::tanh(raw[j]);
    c[j] = r;
    for (std::size_t i = 0; i < j; ++i) work[i] = c[i] - r * c[j - 1 - i];
    for (std::size_t i = 0; i < j; ++i) c[i] = work[i];
  }
  return c;
}

// ---------------------------------------------------------------------------
// Kalman filter for ARMA errors in Harvey's state-space form, applied to
// several data columns at once (outcome plus each regressor) so the
// regression coefficients can be profiled out by GLS.

struct FilterOutput {
  bool ok = false;
  MatrixXd whitened;  // observed rows x columns, innovations / sqrt(F)
  MatrixXd innovations;  // all rows x columns, NaN where skipped
  VectorXd gain_variance;  // F per observed row
  double sum_log_f = 0.0;
};

bool stationary_p0(const std::vector<double>& phi, const std::vector<double>& psi, MatrixXd& p0) {
  const auto r = static_cast<Eigen::Index>(phi.size());
  MatrixXd t = MatrixXd::Zero(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    t(i, 0) = phi[static_cast<std::size_t>(i)];
    if (i + 1 < r) t(i, i + 1) = 1.0;
  }
  VectorXd rv(r);
  for (Eigen::Index i = 0; i < r; ++i) rv[i] = psi[static_cast<std::size_t>(i)];
  const MatrixXd q = rv * rv.transpose();
  const Eigen::Index r2 = r * r;
  MatrixXd lhs = MatrixXd::Identity(r2, r2);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j)
      for (Eigen::Index k = 0; k < r; ++k)
        for (Eigen::Index l = 0; l < r; ++l) lhs(i * r + j, k * r + l) -= t(i, k) * t(j, l);
  VectorXd rhs(r2);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) rhs(i * r + j) = q(i, j);
  Eigen::PartialPivLU<MatrixXd> lu(lhs);
  if (!(std::fabs(lu.determinant()) > 1e-14)) return false;
  const VectorXd sol = lu.solve(rhs);
  p0.resize(r, r);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < r; ++j) p0(i, j) = 0.5 * (sol(i * r + j) + sol(j * r + i));
  return p0.allFinite();
}

FilterOutput kalman_filter(const std::vector<double>& phi_in, const std::vector<double>& theta_plus,
                           const MatrixXd& data, const std::vector<char>& observed, bool keep_innovations) {
  FilterOutput out;
  const std::size_t p = phi_in.size();
  const std::size_t q = theta_plus.size();
  const std::size_t r = std::max(p, q + 1);
  std::vector<double> phi(r, 0.0), psi(r, 0.0);
  for (std::size_t i = 0; i < p; ++i) phi[i] = phi_in[i];
  psi[0] = 1.0;
  for (std::size_t j = 0; j < q; ++j) psi[j + 1] = theta_plus[j];

  MatrixXd pm;
  if (!stationary_p0(phi, psi, pm)) return out;

  const Eigen::Index n = data.rows();
  const Eigen::Index m = data.cols();
  const auto ri = static_cast<Eigen::Index>(r);
  const Eigen::Index n_obs = std::count(observed.begin(), observed.end(), char{1});
  out.whitened.resize(n_obs, m);
  out.gain_variance.resize(n_obs);
  if (keep_innovations) out.innovations = MatrixXd::Constant(n, m, std::numeric_limits<double>::quiet_NaN());

  MatrixXd a = MatrixXd::Zero(ri, m);
  MatrixXd a_next(ri, m);
  MatrixXd tp(ri, ri), pn(ri, ri);
  std::vector<double> k(r), v(static_cast<std::size_t>(m));
  bool steady = false;
  Eigen::Index row = 0;

  auto propagate_cov = [&](bool with_gain, double f) {
    // pn = T P T' + psi psi' - f k k'
    for (Eigen::Index i = 0; i < ri; ++i)
      for (Eigen::Index c = 0; c < ri; ++c)
        tp(i, c) = phi[static_cast<std::size_t>(i)] * pm(0, c) + (i + 1 < ri ? pm(i + 1, c) : 0.0);
    for (Eigen::Index i = 0; i < ri; ++i)
      for (Eigen::Index l = 0; l <= i; ++l) {
        double val = tp(i, 0) * phi[static_cast<std::size_t>(l)] + (l + 1 < ri ? tp(i, l + 1) : 0.0) +
                     psi[static_cast<std::size_t>(i)] * psi[static_cast<std::size_t>(l)];
        if (with_gain) val -= f * k[static_cast<std::size_t>(i)] * k[static_cast<std::size_t>(l)];
        pn(i, l) = val;
        pn(l, i) = val;
      }
    const double change = (pn - pm).cwiseAbs().maxCoeff();
    pm.swap(pn);
    return change;
  };

  for (Eigen::Index t = 0; t < n; ++t) {
    if (observed[static_cast<std::size_t>(t)]) {
      const double f = pm(0, 0);
      if (!(f > 0.0) || !std::isfinite(f)) return out;
      const double sqrt_f = std::sqrt(f);
      for (std::size_t i = 0; i < r; ++i) {
        const double tp_i0 = phi[i] * pm(0, 0) + (i + 1 < r ? pm(static_cast<Eigen::Index>(i) + 1, 0) : 0.0);
        k[i] = tp_i0 / f;
      }
      for (Eigen::Index c = 0; c < m; ++c) {
        const double vc = data(t, c) - a(0, c);
        v[static_cast<std::size_t>(c)] = vc;
        out.whitened(row, c) = vc / sqrt_f;
        if (keep_innovations) out.innovations(t, c) = vc;
      }
      out.gain_variance[row] = f;
      out.sum_log_f += std::log(f);
      ++row;
      for (Eigen::Index i = 0; i < ri; ++i)
        for (Eigen::Index c = 0; c < m; ++c)
          a_next(i, c) = phi[static_cast<std::size_t>(i)] * a(0, c) + (i + 1 < ri ? a(i + 1, c) : 0.0) +
                         k[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(c)];
      a.swap(a_next);
      if (!steady) steady = propagate_cov(true, f) < 1e-12;
    } else {
      for (Eigen::Index i = 0; i < ri; ++i)
        for (Eigen::Index c = 0; c < m; ++c)
          a_next(i, c) = phi[static_cast<std::size_t>(i)] * a(0, c) + (i + 1 < ri ? a(i + 1, c) : 0.0);
      a.swap(a_next);
      propagate_cov(false, 0.0);
      steady = false;
    }
  }
  out.ok = true;
  return out;
}

struct Profile {
  bool ok = false;
  double neg2ll = kInf;
  double sigma2 = 0.0;
  VectorXd beta;
  FilterOutput filter;
};

// data columns: outcome, then regressors (intercept included).
Profile profile_likelihood(const std::vector<double>& phi, const std::vector<double>& theta_paper,
                           const MatrixXd& data, const std::vector<char>& observed, bool keep) {
  Profile pr;
  std::vector<double> theta_plus(theta_paper.size());
  for (std::size_t j = 0; j < theta_paper.size(); ++j) theta_plus[j] = -theta_paper[j];
  pr.filter = kalman_filter(phi, theta_plus, data, observed, keep);
  if (!pr.filter.ok) return pr;
  const MatrixXd& w = pr.filter.whitened;
  const Eigen::Index n = w.rows();
  const Eigen::Index k = w.cols() - 1;
  VectorXd resid = w.col(0);
  if (k > 0) {
    const MatrixXd wx = w.rightCols(k);
    pr.beta = wx.colPivHouseholderQr().solve(w.col(0));
    resid -= wx * pr.beta;
  } else {
    pr.beta.resize(0);
  }
  const double ssr = resid.squaredNorm();
  pr.sigma2 = ssr / static_cast<double>(n);
  if (!(pr.sigma2 > 0.0) || !std::isfinite(pr.sigma2)) {
    // Perfect fit: leave the likelihood at -inf-equivalent but finite.
    pr.sigma2 = std::max(pr.sigma2, 0.0);
    pr.neg2ll = pr.sigma2 == 0.0 ? -kInf : kInf;
    pr.ok = pr.sigma2 == 0.0;
    return pr;
  }
  pr.neg2ll = static_cast<double>(n) * (std::log(2.0 * std::numbers::pi * pr.sigma2) + 1.0) + pr.filter.sum_log_f;
  pr.ok = std::isfinite(pr.neg2ll);
  return pr;
}

// -2 log-likelihood with the regression coefficients held at `beta` and the
// innovation variance concentrated out.
double neg2ll_fixed_beta(const std::vector<double>& phi, const std::vector<double>& theta_paper,
                         const VectorXd& beta, const MatrixXd& data, const std::vector<char>& observed) {
  if (min_root_modulus(phi) <= 1.0 || min_root_modulus(theta_paper) <= 1.0) return kInf;
  MatrixXd w(data.rows(), 1);
  w.col(0) = data.col(0);
  if (beta.size() > 0) w.col(0) -= data.rightCols(beta.size()) * beta;
  for (Eigen::Index t = 0; t < w.rows(); ++t) {
    if (!observed[static_cast<std::size_t>(t)]) w(t, 0) = 0.0;
  }
  std::vector<double> theta_plus(theta_paper.size());
  for (std::size_t j = 0; j < theta_paper.size(); ++j) theta_plus[j] = -theta_paper[j];
  const auto f = kalman_filter(phi, theta_plus, w, observed, false);
  if (!f.ok) return kInf;
  const double n = static_cast<double>(f.whitened.rows());
  const double s2 = f.whitened.col(0).squaredNorm() / n;
  if (!(s2 > 0)) return kInf;
  return n * (std::log(2.0 * std::numbers::pi * s2) + 1.0) + f.sum_log_f;
}

// Conditional sum of squares for ARMA errors on the OLS residuals.
double css_objective(const std::vector<double>& phi, const std::vector<double>& theta_paper,
                     const VectorXd& w, const std::vector<char>& observed) {
  const Eigen::Index n = w.size();
  const auto p = static_cast<Eigen::Index>(phi.size());
  const auto q = static_cast<Eigen::Index>(theta_paper.size());
  VectorXd e = VectorXd::Zero(n);
  double ssq = 0.0;
  int count = 0;
  for (Eigen::Index t = p; t < n; ++t) {
    if (!observed[static_cast<std::size_t>(t)]) continue;
    double val = w[t];
    bool complete = true;
    for (Eigen::Index i = 0; i < p; ++i) {
      if (!observed[static_cast<std::size_t>(t - 1 - i)]) complete = false;
      val -= phi[static_cast<std::size_t>(i)] * w[t - 1 - i];
    }
    for (Eigen::Index j = 0; j < q && t - 1 - j >= 0; ++j) val += theta_paper[static_cast<std::size_t>(j)] * e[t - 1 - j];
    e[t] = val;
    if (complete) {
      ssq += val * val;
      ++count;
    }
  }
  if (count == 0) return kInf;
  return 0.5 * std::log(ssq / count);
}

struct Workspace {
  MatrixXd data;  // outcome, intercept, exogenous; missing rows zeroed
  std::vector<char> observed;
  std::vector<std::string> names;  // regression names incl. "c"
  int n_obs = 0;
};

Workspace make_workspace(const TsDesign& design) {
  Workspace ws;
  const Eigen::Index n = design.y.size();
  const Eigen::Index k = design.x.cols() + 1;
  ws.data = MatrixXd::Zero(n, k + 1);
  ws.observed.assign(static_cast<std::size_t>(n), 0);
  ws.names.push_back("c");
  for (const auto& nm : design.names) ws.names.push_back(nm);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!design.valid[static_cast<std::size_t>(t)]) continue;
    ws.observed[static_cast<std::size_t>(t)] = 1;
    ws.data(t, 0) = design.y[t];
    ws.data(t, 1) = 1.0;
    for (Eigen::Index j = 0; j < design.x.cols(); ++j) ws.data(t, j + 2) = design.x(t, j);
    ++ws.n_obs;
  }
  return ws;
}

void split_raw(const VectorXd& z, int p, int q, std::vector<double>& phi, std::vector<double>& theta) {
  std::vector<double> ar(z.data(), z.data() + p);
  std::vector<double> ma(z.data() + p, z.data() + p + q);
  phi = to_stationary(ar);
  theta = to_stationary(ma);
}

Estimate make_estimate(std::string name, double value, double se) {
  Estimate e{std::move(name), value, se, value / se, 0.0};
  e.p_value = stats::normal_two_sided_p(e.z);
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Outcome o) { return o == Outcome::Cases ? "cases" : "deaths"; }

Outcome parse_outcome(std::string_view text) {
  if (text == "cases") return Outcome::Cases;
  if (text == "deaths") return Outcome::Deaths;
  throw DomainError("unknown outcome '" + std::string(text) + "' (expected cases|deaths)");
}

LagSpec LagSpec::defaults(Outcome outcome) {
  if (outcome == Outcome::Cases) return LagSpec{21, 7, 21, 14, 14};
  return LagSpec{35, 21, 35, 28, 28};
}

LagSpec LagSpec::parse(std::string_view text, LagSpec base) {
  std::string s(text);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw DomainError("lag override '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    int value = 0;
    try {
      value = std::stoi(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw DomainError("lag override '" + item + "' has a non-integer value");
    }
    if (value < 0) throw DomainError("lag override '" + item + "' is negative");
    if (key == "v1") base.v1 = value;
    else if (key == "v2") base.v2 = value;
    else if (key == "v") base.v = value;
    else if (key == "p") base.policy = value;
    else if (key == "m") base.mobility = value;
    else throw DomainError("unknown lag key '" + key + "' (expected v1, v2, v, p, m)");
  }
  return base;
}

int LagSpec::deepest() const { return std::max({v1, v2, v, policy, mobility}); }

int TsDesign::usable_rows() const { return static_cast<int>(std::count(valid.begin(), valid.end(), char{1})); }

TsDesign build_ts_design(const ObservationPanel& panel, std::string_view country, Outcome outcome,
                         const std::optional<LagSpec>& lag_override) {
  if (panel.frequency != Frequency::Daily) throw DesignError("time-series designs need a daily panel");
  const CountrySeries& s = panel.at(country);
  const LagSpec lags = lag_override.value_or(LagSpec::defaults(outcome));
  const std::size_t n = panel.dates.size();

  TsDesign d;
  d.country = std::string(country);
  d.outcome = outcome;

  auto all_missing = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return is_missing(x); });
  };
  d.uses_total_doses = all_missing(s[PanelColumn::V1]) && all_missing(s[PanelColumn::V2]) &&
                       !all_missing(s[PanelColumn::TotalDoses]);

  const auto& counts = outcome == Outcome::Cases ? s[PanelColumn::NewCasesPm] : s[PanelColumn::NewDeathsPm];
  std::vector<double> log_level(n, kMissing), log_tests(n, kMissing);
  for (std::size_t t = 0; t < n; ++t) {
    if (!is_missing(counts[t])) {
      if (counts[t] < kCountFloor) ++d.floored_counts;
      log_level[t] = std::log(std::max(counts[t], kCountFloor));
    }
    const double tests = s[PanelColumn::NewTests][t];
    if (!is_missing(tests)) log_tests[t] = std::log(std::max(tests, kCountFloor));
  }

  struct Term {
    std::string name;
    const std::vector<double>* series;
    int lag;
    bool differenced;
  };
  std::vector<Term> terms;
  auto lag_name = [](const std::string& base, int lag) {
    return lag == 0 ? base + "(t)" : base + "(t-" + std::to_string(lag) + ")";
  };
  if (d.uses_total_doses) {
    terms.push_back({lag_name("dV", lags.v), &s[PanelColumn::TotalDoses], lags.v, true});
  } else {
    terms.push_back({lag_name("dV1", lags.v1), &s[PanelColumn::V1], lags.v1, true});
    terms.push_back({lag_name("dV2", lags.v2), &s[PanelColumn::V2], lags.v2, true});
  }
  if (outcome == Outcome::Cases) terms.push_back({"dlogT(t)", &log_tests, 0, true});
  terms.push_back({"wkd(t)", &s[PanelColumn::Weekend], 0, false});
  terms.push_back({lag_name("dP", lags.policy), &s[PanelColumn::Policy], lags.policy, true});
  terms.push_back({lag_name("dM", lags.mobility), &s[PanelColumn::MobilityIndex], lags.mobility, true});

  int first = 1;
  for (const auto& term : terms) first = std::max(first, term.lag + (term.differenced ? 1 : 0));
  if (static_cast<std::size_t>(first) >= n) {
    throw InsufficientDataError(d.country + ": panel too short for the deepest lag");
  }

  const auto rows = static_cast<Eigen::Index>(n) - first;
  VectorXd y(rows), level(rows);
  MatrixXd x(rows, static_cast<Eigen::Index>(terms.size()));
  std::vector<char> valid(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = static_cast<std::size_t>(r + first);
    y[r] = log_level[t] - log_level[t - 1];
    level[r] = log_level[t];
    bool ok = !is_missing(y[r]);
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const auto& term = terms[j];
      const auto& v = *term.series;
      const std::size_t at = t - static_cast<std::size_t>(term.lag);
      const double val = term.differenced ? v[at] - v[at - 1] : v[at];
      x(r, static_cast<Eigen::Index>(j)) = val;
      ok = ok && !is_missing(val);
    }
    valid[static_cast<std::size_t>(r)] = ok ? 1 : 0;
  }

  // Trim invalid rows at both ends; interior gaps remain as skipped rows.
  Eigen::Index lo = 0, hi = rows;
  while (lo < hi && !valid[static_cast<std::size_t>(lo)]) ++lo;
  while (hi > lo && !valid[static_cast<std::size_t>(hi - 1)]) --hi;
  const Eigen::Index kept = hi - lo;
  d.y = y.segment(lo, kept);
  d.x = x.middleRows(lo, kept);
  d.log_level = level.segment(lo, kept);
  d.valid.assign(valid.begin() + lo, valid.begin() + hi);
  for (Eigen::Index r = 0; r < kept; ++r) d.dates.push_back(panel.dates[static_cast<std::size_t>(lo + r + first)]);
  d.initial_log_level = kept > 0 ? log_level[static_cast<std::size_t>(lo + first - 1)] : kMissing;
  for (const auto& term : terms) d.names.push_back(term.name);
  d.excluded_rows = static_cast<int>(rows) - d.usable_rows();
  if (d.usable_rows() < kMinUsableRows) {
    throw InsufficientDataError(d.country + ": only " + std::to_string(d.usable_rows()) +
                                " usable rows after lagging (need " + std::to_string(kMinUsableRows) + ")");
  }
  return d;
}

TsDesign make_design(VectorXd y, MatrixXd x, std::vector<std::string> names) {
  if (x.rows() != y.size()) throw DesignError("outcome and regressors have different lengths");
  if (static_cast<std::size_t>(x.cols()) != names.size()) throw DesignError("one name per regressor required");
  TsDesign d;
  d.country = "synthetic";
  d.valid.resize(static_cast<std::size_t>(y.size()));
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    bool ok = std::isfinite(y[t]);
    for (Eigen::Index j = 0; j < x.cols(); ++j) ok = ok && std::isfinite(x(t, j));
    d.valid[static_cast<std::size_t>(t)] = ok ? 1 : 0;
  }
  d.log_level.resize(y.size());
  double level = 0.0;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    level += std::isfinite(y[t]) ? y[t] : 0.0;
    d.log_level[t] = level;
  }
  const Date origin = Date::from_ymd(2020, 1, 1);
  for (Eigen::Index t = 0; t < y.size(); ++t) d.dates.push_back(origin + static_cast<int>(t));
  d.y = std::move(y);
  d.x = std::move(x);
  d.names = std::move(names);
  d.excluded_rows = static_cast<int>(d.y.size()) - d.usable_rows();
  return d;
}

std::string to_string(const ArimaOrder& o) {
  return "(" + std::to_string(o.p) + "," + std::to_string(o.d) + "," + std::to_string(o.q) + ")";
}

std::vector<double> ArimaFit::phi() const {
  std::vector<double> out;
  for (const auto& e : ar) out.push_back(e.value);
  return out;
}

std::vector<double> ArimaFit::theta() const {
  std::vector<double> out;
  for (const auto& e : ma) out.push_back(e.value);
  return out;
}

double min_root_modulus(std::span<const double> c) {
  std::size_t k = c.size();
  while (k > 0 && c[k - 1] == 0.0) --k;
  if (k == 0) return kInf;
  // Roots of 1 - sum c_i z^i are reciprocals of the companion eigenvalues.
  MatrixXd comp = MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) comp(0, static_cast<Eigen::Index>(i)) = c[i];
  for (std::size_t i = 1; i < k; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i) - 1) = 1.0;
  const double largest = Eigen::EigenSolver<MatrixXd>(comp, false).eigenvalues().cwiseAbs().maxCoeff();
  return largest > 0 ? 1.0 / largest : kInf;
}

ArimaFit fit_arimax(const TsDesign& design, ArimaOrder order, const FitOptions& options) {
  if (order.d != 1) throw DomainError("only d = 1 is supported");
  if (order.p < 0 || order.q < 0) throw DomainError("ARMA orders must be non-negative");
  const Workspace ws = make_workspace(design);
  const int k = static_cast<int>(ws.names.size());
  if (ws.n_obs <= k + order.p + order.q + 1) throw InsufficientDataError("too few observations for the model");

  // Collinearity check and OLS start on the observed rows.
  MatrixXd xo(ws.n_obs, k);
  VectorXd yo(ws.n_obs);
  for (Eigen::Index t = 0, r = 0; t < ws.data.rows(); ++t) {
    if (!ws.observed[static_cast<std::size_t>(t)]) continue;
    yo[r] = ws.data(t, 0);
    xo.row(r) = ws.data.row(t).tail(k);
    ++r;
  }
  linalg::LeastSquares ols;
  try {
    ols = linalg::least_squares(xo, yo, ws.names);
  } catch (const RankError& e) {
    throw DesignError(e.what());
  }

  ArimaFit fit;
  fit.order = order;
  fit.n_obs = ws.n_obs;
  const int p = order.p, q = order.q;
  std::vector<double> phi, theta;
  VectorXd beta;
  double neg2ll = 0.0;

  if (p == 0 && q == 0) {
    beta = ols.coef;
    fit.sigma2 = ols.residuals.squaredNorm() / ws.n_obs;
    neg2ll = ws.n_obs * (std::log(2.0 * std::numbers::pi * fit.sigma2) + 1.0);
    fit.convergence_message = "closed form";
  } else {
    // Conditional sum of squares on the OLS residuals gives the start.
    VectorXd w = VectorXd::Zero(ws.data.rows());
    for (Eigen::Index t = 0; t < ws.data.rows(); ++t) {
      if (ws.observed[static_cast<std::size_t>(t)]) w[t] = ws.data(t, 0) - ws.data.row(t).tail(k).dot(ols.coef);
    }
    optim::BfgsOptions bopt;
    bopt.max_iterations = options.max_iterations;
    auto css = [&](const VectorXd& z) {
      std::vector<double> ph, th;
      split_raw(z, p, q, ph, th);
      return css_objective(ph, th, w, ws.observed);
    };
    const auto css_res = optim::minimize_bfgs(css, VectorXd::Zero(p + q), bopt);
    VectorXd start = css_res.x.allFinite() ? css_res.x : VectorXd::Zero(p + q);
    start = start.cwiseMax(-4.0).cwiseMin(4.0);

    const double scale = 2.0 * ws.n_obs;
    auto ml = [&](const VectorXd& z) {
      std::vector<double> ph, th;
      split_raw(z, p, q, ph, th);
      const auto pr = profile_likelihood(ph, th, ws.data, ws.observed, false);
      return pr.ok ? pr.neg2ll / scale : kInf;
    };

    std::mt19937_64 rng(options.seed ^ (static_cast<std::uint64_t>(p) * 1000003ULL + static_cast<std::uint64_t>(q)));
    std::normal_distribution<double> jitter(0.0, 0.5);
    optim::BfgsResult best;
    best.value = kInf;
    for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
      VectorXd z0 = start;
      if (attempt > 0) {
        for (Eigen::Index i = 0; i < z0.size(); ++i) z0[i] = std::clamp(z0[i] + jitter(rng), -3.0, 3.0);
        if (attempt == 1) z0.setZero();
      }
      auto res = optim::minimize_bfgs(ml, z0, bopt);
      if (std::isfinite(res.value) && (!std::isfinite(best.value) || res.value < best.value ||
                                       (res.converged && !best.converged && res.value <= best.value + 1e-9))) {
        best = res;
      }
      fit.restarts = attempt;
      if (res.converged && std::isfinite(res.value)) break;
    }
    if (!best.converged || !std::isfinite(best.value)) {
      std::ostringstream msg;
      msg << "ARIMA" << to_string(order) << " did not converge after " << fit.restarts
          << " restart(s); best -2logL/2n = " << best.value << " (" << best.message << ")";
      throw FitError(msg.str());
    }
    split_raw(best.x, p, q, phi, theta);
    const auto pr = profile_likelihood(phi, theta, ws.data, ws.observed, false);
    beta = pr.beta;
    fit.sigma2 = pr.sigma2;
    neg2ll = pr.neg2ll;
    fit.converged = true;
    fit.convergence_message = best.message;
  }

  fit.loglik = -0.5 * neg2ll;
  fit.n_params = p + q + k + 1;
  const double np = fit.n_params;
  const double n = fit.n_obs;
  fit.aic = neg2ll + 2.0 * np;
  fit.aicc = n - np - 1.0 > 0 ? fit.aic + 2.0 * np * (np + 1.0) / (n - np - 1.0) : kInf;
  fit.min_ar_root = min_root_modulus(phi);
  fit.min_ma_root = min_root_modulus(theta);
  fit.stationary_invertible = fit.min_ar_root > 1.0 + kRootMargin && fit.min_ma_root > 1.0 + kRootMargin;

  // Innovations at the optimum.
  {
    MatrixXd w(ws.data.rows(), 1);
    w.col(0) = ws.data.col(0) - ws.data.rightCols(k) * beta;
    std::vector<double> theta_plus(theta.size());
    for (std::size_t j = 0; j < theta.size(); ++j) theta_plus[j] = -theta[j];
    const auto f = kalman_filter(phi, theta_plus, w, ws.observed, true);
    fit.residuals = f.ok ? VectorXd(f.innovations.col(0)) : VectorXd::Constant(w.rows(), kMissing);
  }

  // Inverse observed information in the natural parameterisation.
  const int dim = p + q + k;
  MatrixXd cov = MatrixXd::Constant(dim, dim, kMissing);
  if (p == 0 && q == 0) {
    cov = fit.sigma2 * ols.xtx_inv;
  } else {
    VectorXd x0(dim), steps(dim);
    for (int i = 0; i < p; ++i) x0[i] = phi[static_cast<std::size_t>(i)];
    for (int j = 0; j < q; ++j) x0[p + j] = theta[static_cast<std::size_t>(j)];
    x0.tail(k) = beta;
    for (int i = 0; i < p + q; ++i) steps[i] = 1e-4;
    const VectorXd ols_se = (fit.sigma2 * ols.xtx_inv.diagonal()).cwiseSqrt();
    for (int j = 0; j < k; ++j) steps[p + q + j] = 1e-3 * std::max(ols_se[j], 1e-12);
    auto f = [&](const VectorXd& v) {
      std::vector<double> ph(v.data(), v.data() + p), th(v.data() + p, v.data() + p + q);
      return 0.5 * neg2ll_fixed_beta(ph, th, v.tail(k), ws.data, ws.observed);
    };
    const MatrixXd h = optim::numeric_hessian(f, x0, steps);
    Eigen::LDLT<MatrixXd> ldlt(0.5 * (h + h.transpose()));
    if (h.allFinite() && ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.vectorD().minCoeff() > 0) {
      cov = ldlt.solve(MatrixXd::Identity(dim, dim));
    } else {
      fit.convergence_message += "; information matrix not positive definite";
    }
  }
  fit.covariance = cov;
  auto se_at = [&](int i) { return std::sqrt(cov(i, i)); };
  for (int i = 0; i < p; ++i) fit.ar.push_back(make_estimate("ar" + std::to_string(i + 1), phi[static_cast<std::size_t>(i)], se_at(i)));
  for (int j = 0; j < q; ++j) fit.ma.push_back(make_estimate("ma" + std::to_string(j + 1), theta[static_cast<std::size_t>(j)], se_at(p + j)));
  for (int j = 0; j < k; ++j) fit.regression.push_back(make_estimate(ws.names[static_cast<std::size_t>(j)], beta[j], se_at(p + q + j)));
  return fit;
}

OrderSelection select_order(const TsDesign& design, int p_max, int q_max, const FitOptions& options, int jobs) {
  if (p_max < 0 || q_max < 0) throw DomainError("order bounds must be non-negative");
  std::vector<ArimaOrder> grid;
  for (int p = 0; p <= p_max; ++p)
    for (int q = 0; q <= q_max; ++q) grid.push_back({p, 1, q});

  std::vector<std::optional<ArimaFit>> fits(grid.size());
  std::vector<Candidate> candidates(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    candidates[i].order = grid[i];
    try {
      auto fit = fit_arimax(design, grid[i], options);
      candidates[i].aicc = fit.aicc;
      const bool clear = fit.min_ar_root > kSelectionRootMin && fit.min_ma_root > kSelectionRootMin;
      candidates[i].usable = fit.converged && fit.stationary_invertible && clear && std::isfinite(fit.aicc);
      if (!fit.stationary_invertible) candidates[i].note = "root on or inside the unit circle";
      else if (!clear) candidates[i].note = "root numerically on the unit circle";
      fits[i] = std::move(fit);
    } catch (const FitError& e) {
      candidates[i].aicc = kInf;
      candidates[i].note = e.what();
    } catch (const InsufficientDataError& e) {
      candidates[i].aicc = kInf;
      candidates[i].note = e.what();
    }
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!candidates[i].usable) continue;
    if (!best) {
      best = i;
      continue;
    }
    const auto& a = candidates[i];
    const auto& b = candidates[*best];
    const auto key_a = std::make_tuple(a.aicc, a.order.p + a.order.q, a.order.q);
    const auto key_b = std::make_tuple(b.aicc, b.order.p + b.order.q, b.order.q);
    if (key_a < key_b) best = i;
  }
  if (!best) throw SelectionError("no candidate order produced a converged stationary/invertible fit");
  OrderSelection sel;
  sel.order = grid[*best];
  sel.fit = std::move(*fits[*best]);
  sel.candidates = std::move(candidates);
  return sel;
}

std::vector<double> fitted_path(const ArimaFit& fit, const TsDesign& design) {
  const Eigen::Index n = design.y.size();
  if (fit.residuals.size() != n) throw DomainError("fit does not belong to this design");
  std::vector<double> out(static_cast<std::size_t>(n));
  double level = design.initial_log_level;
  for (Eigen::Index t = 0; t < n; ++t) {
    double pred;
    if (design.valid[static_cast<std::size_t>(t)]) {
      pred = design.y[t] - fit.residuals[t];
    } else {
      // No innovation on skipped rows: predict with the regression part only.
      pred = fit.regression.front().value;
      bool ok = true;
      for (Eigen::Index j = 0; j < design.x.cols(); ++j) {
        ok = ok && std::isfinite(design.x(t, j));
        pred += fit.regression[static_cast<std::size_t>(j) + 1].value * design.x(t, j);
      }
      if (!ok) pred = 0.0;
    }
    level += pred;
    out[static_cast<std::size_t>(t)] = level;
  }
  return out;
}

LjungBox ljung_box(std::span<const double> residuals, int lag, int fitted_params) {
  LjungBox lb;
  lb.lag = lag;
  std::vector<double> e;
  for (double r : residuals) {
    if (std::isfinite(r)) e.push_back(r);
  }
  const auto n = static_cast<double>(e.size());
  lb.df = lag - fitted_params > 0 ? lag - fitted_params : lag;
  if (e.size() <= static_cast<std::size_t>(lag) + 1) {
    lb.p_value = kMissing;
    return lb;
  }
  const double m = stats::mean(e);
  double c0 = 0.0;
  for (double v : e) c0 += (v - m) * (v - m);
  if (c0 == 0.0) return lb;
  double q = 0.0;
  for (int k = 1; k <= lag; ++k) {
    double ck = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < e.size(); ++t) ck += (e[t] - m) * (e[t - static_cast<std::size_t>(k)] - m);
    const double rho = ck / c0;
    q += rho * rho / (n - k);
  }
  lb.statistic = n * (n + 2.0) * q;
  lb.p_value = stats::chi2_sf(lb.statistic, lb.df);
  return lb;
}

ResidualDiagnostics residual_diagnostics(const ArimaFit& fit) {
  ResidualDiagnostics d;
  std::vector<double> e;
  for (Eigen::Index t = 0; t < fit.residuals.size(); ++t) {
    if (std::isfinite(fit.residuals[t])) e.push_back(fit.residuals[t]);
  }
  d.n = static_cast<int>(e.size());
  if (e.empty()) return d;
  d.mean = stats::mean(e);
  d.variance = stats::variance(e);
  const int arma = fit.order.p + fit.order.q;
  for (int lag : {7, 14}) d.ljung_box.push_back(ljung_box(e, lag, arma));
  const double sd = std::sqrt(d.variance);
  d.mean_zero = std::fabs(d.mean) <= 3.0 * sd / std::sqrt(static_cast<double>(d.n)) || sd == 0.0;
  d.white_noise = std::all_of(d.ljung_box.begin(), d.ljung_box.end(),
                              [](const LjungBox& lb) { return !(lb.p_value < 0.05); });
  // Stationarity verdict: mean-zero residuals with short-memory autocorrelation.
  double max_acf = 0.0;
  if (sd > 0.0) {
    for (std::size_t k = 1; k <= 14 && k < e.size(); ++k) {
      double ck = 0.0;
      for (std::size_t t = k; t < e.size(); ++t) ck += (e[t] - d.mean) * (e[t - k] - d.mean);
      max_acf = std::max(max_acf, std::fabs(ck / (d.variance * d.n)));
    }
  }
  d.stationary = d.mean_zero && max_acf < 0.5;
  return d;
}

nlohmann::json to_json(const ArimaFit& fit) {
  auto est = [](const std::vector<Estimate>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : v) {
      arr.push_back({{"name", e.name}, {"estimate", e.value}, {"se", e.se}, {"z", e.z}, {"p", e.p_value}});
    }
    return arr;
  };
  return {{"order", {fit.order.p, fit.order.d, fit.order.q}},
          {"regression", est(fit.regression)},
          {"ar", est(fit.ar)},
          {"ma", est(fit.ma)},
          {"sigma2", fit.sigma2},
          {"loglik", fit.loglik},
          {"aic", fit.aic},
          {"aicc", fit.aicc},
          {"n_obs", fit.n_obs},
          {"n_params", fit.n_params},
          {"min_ar_root", std::isfinite(fit.min_ar_root) ? nlohmann::json(fit.min_ar_root) : nlohmann::json(nullptr)},
          {"min_ma_root", std::isfinite(fit.min_ma_root) ? nlohmann::json(fit.min_ma_root) : nlohmann::json(nullptr)},
          {"stationary_invertible", fit.stationary_invertible},
          {"converged", fit.converged},
          {"convergence", fit.convergence_message},
          {"restarts", fit.restarts}};
}

nlohmann::json to_json(const ResidualDiagnostics& d) {
  nlohmann::json lb = nlohmann::json::array();
  for (const auto& l : d.ljung_box) {
    lb.push_back({{"lag", l.lag}, {"statistic", l.statistic}, {"df", l.df}, {"p", l.p_value}});
  }
  return {{"n", d.n},           {"mean", d.mean},           {"variance", d.variance}, {"ljung_box", lb},
          {"mean_zero", d.mean_zero}, {"white_noise", d.white_noise}, {"stationary", d.stationary}};
}

}  // namespace vacstrat::ts
