#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vacstrat/date.hpp"
#include "vacstrat/ingest.hpp"

namespace vacstrat::ts {

enum class Outcome { Cases, Deaths };
std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view text);

// Lags in days for the differenced regressors.
struct LagSpec {
  int v1 = 21;
  int v2 = 7;
  int v = 21;  // total doses, used when the V1/V2 split is unavailable
  int policy = 14;
  int mobility = 14;

  static LagSpec defaults(Outcome outcome);
  // Applies "v1=28,p=21"-style overrides on top of `base`.
  static LagSpec parse(std::string_view text, LagSpec base);
  int deepest() const;
};

// Differenced outcome and exogenous columns for one country. Rows cover a
// contiguous date range; rows with any missing entry stay in place but are
// flagged invalid and skipped by the likelihood.
struct TsDesign {
  std::string country;
  Outcome outcome = Outcome::Cases;
  std::vector<Date> dates;
  Eigen::VectorXd y;  // D log outcome
  Eigen::MatrixXd x;  // exogenous columns, intercept excluded
  std::vector<std::string> names;
  std::vector<char> valid;
  Eigen::VectorXd log_level;  // observed log outcome per row
  double initial_log_level = 0.0;  // log level the day before the first row
  bool uses_total_doses = false;
  int excluded_rows = 0;
  int floored_counts = 0;  // days where a count below 0.5 was floored before the log

  int usable_rows() const;
};

// Outcome: D log(max(count, 0.5)). Regressors for cases: dV1(t-21), dV2(t-7)
// (or dV(t-21)), dlogT(t), wkd(t), dP(t-14), dM(t-14); deaths shift the
// vaccine/policy/mobility lags by 14 days and drop the test term.
TsDesign build_ts_design(const ObservationPanel& panel, std::string_view country, Outcome outcome,
                         const std::optional<LagSpec>& lags = std::nullopt);

// Design from already-differenced data (simulation and tests).
TsDesign make_design(Eigen::VectorXd y, Eigen::MatrixXd x, std::vector<std::string> names);

struct ArimaOrder {
  int p = 0;
  int d = 1;
  int q = 0;
  friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};
std::string to_string(const ArimaOrder& order);

struct Estimate {
  std::string name;
  double value = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p_value = 0.0;
};

// ARMA errors follow n_t = sum phi_i n_{t-i} + e_t - sum theta_i e_{t-i}.
struct ArimaFit {
  ArimaOrder order;
  std::vector<Estimate> regression;  // "c" first, then exogenous columns
  std::vector<Estimate> ar;
  std::vector<Estimate> ma;
  Eigen::MatrixXd covariance;  // order: ar, ma, regression
  double sigma2 = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  double aicc = 0.0;
  int n_obs = 0;
  int n_params = 0;
  Eigen::VectorXd residuals;  // one-step innovations per design row, NaN if skipped
  double min_ar_root = 0.0;   // smallest |root| of the AR polynomial (inf if none)
  double min_ma_root = 0.0;
  bool stationary_invertible = true;
  bool converged = true;
  std::string convergence_message;
  int restarts = 0;

  std::vector<double> phi() const;
  std::vector<double> theta() const;
};

struct FitOptions {
  int max_restarts = 5;
  std::uint64_t seed = 20210708;
  int max_iterations = 300;
};

// Exact Gaussian likelihood through the Kalman filter, regression
// coefficients profiled by GLS, AR/MA parameters optimised on the partial
// autocorrelation scale. Throws DesignError on collinear regressors and
// FitError when no restart converges.
ArimaFit fit_arimax(const TsDesign& design, ArimaOrder order, const FitOptions& options = {});

struct Candidate {
  ArimaOrder order;
  double aicc = 0.0;
  bool usable = false;
  std::string note;
};

struct OrderSelection {
  ArimaOrder order;
  ArimaFit fit;
  std::vector<Candidate> candidates;
};

// Exhaustive AICc grid over p <= p_max, q <= q_max with d = 1. Ties go to the
// smaller p + q, then the smaller q.
OrderSelection select_order(const TsDesign& design, int p_max, int q_max, const FitOptions& options = {},
                            int jobs = 1);

// One-step predictions of D log Y accumulated from the initial log level.
std::vector<double> fitted_path(const ArimaFit& fit, const TsDesign& design);

struct LjungBox {
  int lag = 0;
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};
LjungBox ljung_box(std::span<const double> residuals, int lag, int fitted_params);

struct ResidualDiagnostics {
  int n = 0;
  double mean = 0.0;
  double variance = 0.0;
  std::vector<LjungBox> ljung_box;  // lags 7 and 14
  bool mean_zero = true;
  bool white_noise = true;  // no Ljung-Box rejection at 5%
  bool stationary = true;
};
ResidualDiagnostics residual_diagnostics(const ArimaFit& fit);

// Smallest modulus among the roots of 1 - c_1 z - ... - c_k z^k (inf if k=0).
double min_root_modulus(std::span<const double> coefficients);

nlohmann::json to_json(const ArimaFit& fit);
nlohmann::json to_json(const ResidualDiagnostics& diag);

}  // namespace vacstrat::ts
