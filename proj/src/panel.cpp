#include "vacstrat/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "vacstrat/countries.hpp"
#include "vacstrat/errors.hpp"
#include "vacstrat/linalg.hpp"
#include "vacstrat/parallel.hpp"
#include "vacstrat/stats.hpp"

namespace vacstrat::panel {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kSpanDays = 7;

std::size_t idx(Series s) { return static_cast<std::size_t>(s); }

// Index `days` before t in a panel with spacing `step`, if inside [earliest, t].
std::optional<std::size_t> back(std::size_t t, int days, std::size_t earliest, int step) {
  const int steps = days / step;
  if (steps < 0 || static_cast<std::size_t>(steps) > t) return std::nullopt;
  const std::size_t at = t - static_cast<std::size_t>(steps);
  if (at < earliest) return std::nullopt;
  return at;
}

double value_at(const SeriesBank& bank, Series s, std::size_t t, int days, std::size_t earliest, int step) {
  const auto at = back(t, days, earliest, step);
  return at ? bank[s][*at] : kMissing;
}

template <class Fn>
void for_each_reference(const Term& term, std::size_t t, int step, Fn&& fn) {
  auto ref = [&](Series s, int days) {
    const int steps = days / step;
    if (steps >= 0 && static_cast<std::size_t>(steps) <= t) fn(s, t - static_cast<std::size_t>(steps));
  };
  switch (term.kind) {
    case Term::Kind::Level:
      ref(term.a, term.lag_a);
      break;
    case Term::Kind::Diff:
      ref(term.a, term.lag_a);
      ref(term.a, term.lag_a + kSpanDays);
      break;
    case Term::Kind::Product:
      ref(term.a, term.lag_a);
      ref(term.b, term.lag_b);
      break;
  }
}

// log of the trailing 7-day count ending at each date.
std::vector<double> log_weekly_count(const std::vector<double>& flow, int step, std::vector<char>& nonpositive) {
  const std::size_t n = flow.size();
  std::vector<double> out(n, kMissing);
  nonpositive.assign(n, 0);
  const std::size_t span = step == 1 ? kSpanDays : 1;
  for (std::size_t t = span - 1; t < n; ++t) {
    double sum = 0.0;
    bool ok = true;
    for (std::size_t k = 0; k < span; ++k) {
      const double v = flow[t - k];
      if (is_missing(v)) {
        ok = false;
        break;
      }
      sum += v;
    }
    if (!ok) continue;
    if (sum > 0.0) {
      out[t] = std::log(sum);
    } else {
      nonpositive[t] = 1;
    }
  }
  return out;
}

struct BankFlags {
  std::array<std::vector<char>, kNumSeries> nonpositive;
};

SeriesBank make_bank_flags(const ObservationPanel& panel, std::size_t country, ChineseSet set, BankFlags* flags) {
  const CountrySeries& s = panel.series[country];
  const int step = panel.step_days();
  SeriesBank bank;
  bank[Series::V1] = s[PanelColumn::V1];
  bank[Series::V2] = s[PanelColumn::V2];
  bank[Series::P] = s[PanelColumn::Policy];
  bank[Series::M] = s[PanelColumn::MobilityIndex];
  BankFlags local;
  BankFlags& f = flags ? *flags : local;
  bank[Series::LC] = log_weekly_count(s[PanelColumn::NewCasesPm], step, f.nonpositive[idx(Series::LC)]);
  bank[Series::LD] = log_weekly_count(s[PanelColumn::NewDeathsPm], step, f.nonpositive[idx(Series::LD)]);
  bank[Series::LT] = log_weekly_count(s[PanelColumn::NewTests], step, f.nonpositive[idx(Series::LT)]);
  for (auto* v : {&f.nonpositive[idx(Series::V1)], &f.nonpositive[idx(Series::V2)], &f.nonpositive[idx(Series::P)],
                  &f.nonpositive[idx(Series::M)]}) {
    v->assign(panel.dates.size(), 0);
  }
  const auto& meta = country_meta(panel.countries[country]);
  bank.chinese = (set == ChineseSet::Baseline ? meta.chinese_vaccine : meta.extended_chinese_vaccine) ? 1.0 : 0.0;
  return bank;
}

std::string lag_suffix(int days) { return days == 0 ? "" : "_L" + std::to_string(days); }

}  // namespace

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Cases: return "cases";
    case Outcome::Deaths: return "deaths";
    case Outcome::Mobility: return "mobility";
  }
  return "";
}

std::string_view to_string(InfoVariable v) { return v == InfoVariable::Cases ? "cases" : "deaths"; }
std::string_view to_string(ChineseSet s) { return s == ChineseSet::Baseline ? "baseline" : "extended"; }

Outcome parse_outcome(std::string_view text) {
  if (text == "cases") return Outcome::Cases;
  if (text == "deaths") return Outcome::Deaths;
  if (text == "mobility") return Outcome::Mobility;
  throw BuildError("unknown outcome '" + std::string(text) + "' (expected cases|deaths|mobility)");
}

InfoVariable parse_info(std::string_view text) {
  if (text == "cases") return InfoVariable::Cases;
  if (text == "deaths") return InfoVariable::Deaths;
  throw BuildError("unknown info variable '" + std::string(text) + "' (expected cases|deaths)");
}

ChineseSet parse_chinese_set(std::string_view text) {
  if (text == "baseline") return ChineseSet::Baseline;
  if (text == "extended") return ChineseSet::Extended;
  throw BuildError("unknown Chinese-vaccine set '" + std::string(text) + "'");
}

int parse_trend(std::string_view text) {
  if (text == "none") return 0;
  if (text == "linear") return 1;
  if (text == "quadratic") return 2;
  if (text == "cubic") return 3;
  throw BuildError("unknown trend '" + std::string(text) + "' (expected none|linear|quadratic|cubic)");
}

std::string_view trend_name(int degree) {
  static constexpr std::string_view names[] = {"none", "linear", "quadratic", "cubic"};
  return degree >= 0 && degree <= 3 ? names[degree] : "invalid";
}

void PanelSpec::validate() const {
  if (trend < 0 || trend > 3) throw BuildError("trend degree must be between 0 and 3");
  if (lag_shift < -3 || lag_shift > 3) throw BuildError("lag shift must be between -3 and 3");
  if (interactions && outcome == Outcome::Mobility) {
    throw BuildError("vaccine x mobility interactions apply to the cases and deaths equations only");
  }
  if (info && outcome != Outcome::Mobility) throw BuildError("info variables apply to the mobility equation only");
  if (window && window->last < window->first) throw BuildError("window ends before it starts");
}

std::string PanelSpec::label() const {
  std::string s(to_string(outcome));
  s += "/";
  s += trend_name(trend);
  if (chinese_terms) s += chinese_set == ChineseSet::Baseline ? "/chn" : "/chn-ext";
  if (lag_shift != 0) s += "/shift" + std::string(lag_shift > 0 ? "+" : "") + std::to_string(lag_shift);
  if (window) s += "/" + window->first.to_string() + ":" + window->last.to_string();
  if (frequency == Frequency::Weekly) s += "/weekly";
  if (interactions) s += "/interact";
  if (outcome == Outcome::Mobility) s += "/info-" + std::string(to_string(info_variable()));
  return s;
}

nlohmann::json to_json(const PanelSpec& spec) {
  nlohmann::json j{{"outcome", to_string(spec.outcome)},
                   {"trend", trend_name(spec.trend)},
                   {"chinese", spec.chinese_terms ? to_string(spec.chinese_set) : "off"},
                   {"lag_shift", spec.lag_shift},
                   {"frequency", spec.frequency == Frequency::Daily ? "daily" : "weekly"},
                   {"interactions", spec.interactions}};
  j["window"] = spec.window ? nlohmann::json{spec.window->first.to_string(), spec.window->last.to_string()}
                            : nlohmann::json(nullptr);
  j["info"] = spec.info ? nlohmann::json(to_string(*spec.info)) : nlohmann::json(nullptr);
  return j;
}

PanelSpec spec_from_json(const nlohmann::json& j) {
  PanelSpec s;
  s.outcome = parse_outcome(j.at("outcome").get<std::string>());
  s.trend = parse_trend(j.at("trend").get<std::string>());
  const auto chn = j.at("chinese").get<std::string>();
  s.chinese_terms = chn != "off";
  if (s.chinese_terms) s.chinese_set = parse_chinese_set(chn);
  s.lag_shift = j.at("lag_shift").get<int>();
  s.frequency = j.at("frequency").get<std::string>() == "weekly" ? Frequency::Weekly : Frequency::Daily;
  s.interactions = j.at("interactions").get<bool>();
  if (!j.at("window").is_null()) {
    s.window = DateRange{Date::parse(j["window"][0].get<std::string>()), Date::parse(j["window"][1].get<std::string>())};
  }
  if (!j.at("info").is_null()) s.info = parse_info(j["info"].get<std::string>());
  s.validate();
  return s;
}

SeriesBank make_bank(const ObservationPanel& panel, std::size_t country, ChineseSet set) {
  return make_bank_flags(panel, country, set, nullptr);
}

Series outcome_series(Outcome outcome) {
  switch (outcome) {
    case Outcome::Cases: return Series::LC;
    case Outcome::Deaths: return Series::LD;
    case Outcome::Mobility: return Series::M;
  }
  return Series::M;
}

std::vector<Term> equation_terms(const PanelSpec& spec) {
  using K = Term::Kind;
  std::vector<Term> t;
  auto level = [](std::string name, Series s, int lag, bool chn = false) {
    return Term{std::move(name), K::Level, s, lag, s, 0, chn};
  };
  auto diff = [](std::string name, Series s, int lag, bool chn = false) {
    return Term{std::move(name), K::Diff, s, lag, s, 0, chn};
  };
  if (spec.outcome == Outcome::Mobility) {
    const bool deaths = spec.info_variable() == InfoVariable::Deaths;
    const Series info = deaths ? Series::LD : Series::LC;
    const std::string tag = deaths ? "D" : "C";
    t.push_back(diff("dV1", Series::V1, 0));
    t.push_back(diff("dV2", Series::V2, 0));
    t.push_back(level("V1_L7", Series::V1, 7));
    t.push_back(level("V2_L7", Series::V2, 7));
    t.push_back(diff("dP", Series::P, 0));
    t.push_back(level("P_L7", Series::P, 7));
    t.push_back(diff("dlogd" + tag, info, 0));
    t.push_back(level("logd" + tag, info, 0));
    t.push_back(level("M_L7", Series::M, 7));
    if (spec.chinese_terms) {
      t.push_back(diff("dV1_CHN", Series::V1, 0, true));
      t.push_back(diff("dV2_CHN", Series::V2, 0, true));
      t.push_back(level("V1_CHN_L7", Series::V1, 7, true));
      t.push_back(level("V2_CHN_L7", Series::V2, 7, true));
    }
    return t;
  }
  const bool cases = spec.outcome == Outcome::Cases;
  const int base = cases ? 0 : 14;
  const int v1 = 21 + base + spec.lag_shift;
  const int v2 = 7 + base + spec.lag_shift;
  const int pm = 14 + base;
  const Series own = cases ? Series::LC : Series::LD;
  const std::string tag = cases ? "C" : "D";
  t.push_back(level("V1" + lag_suffix(v1), Series::V1, v1));
  t.push_back(level("V2" + lag_suffix(v2), Series::V2, v2));
  t.push_back(level("P" + lag_suffix(pm), Series::P, pm));
  t.push_back(level("M" + lag_suffix(pm), Series::M, pm));
  t.push_back(diff("dlogd" + tag + lag_suffix(pm), own, pm));
  t.push_back(level("logd" + tag + lag_suffix(pm), own, pm));
  if (cases) t.push_back(diff("dlogdT", Series::LT, 0));
  if (spec.chinese_terms) {
    t.push_back(level("V1_CHN" + lag_suffix(v1), Series::V1, v1, true));
    t.push_back(level("V2_CHN" + lag_suffix(v2), Series::V2, v2, true));
  }
  if (spec.interactions) {
    t.push_back(Term{"V1xM" + lag_suffix(pm), K::Product, Series::V1, pm, Series::M, pm, false});
    t.push_back(Term{"V2xM" + lag_suffix(pm), K::Product, Series::V2, pm, Series::M, pm, false});
  }
  return t;
}

double evaluate(const Term& term, const SeriesBank& bank, std::size_t t, std::size_t earliest, int step) {
  double v = kMissing;
  switch (term.kind) {
    case Term::Kind::Level:
      v = value_at(bank, term.a, t, term.lag_a, earliest, step);
      break;
    case Term::Kind::Diff:
      v = value_at(bank, term.a, t, term.lag_a, earliest, step) -
          value_at(bank, term.a, t, term.lag_a + kSpanDays, earliest, step);
      break;
    case Term::Kind::Product:
      v = value_at(bank, term.a, t, term.lag_a, earliest, step) * value_at(bank, term.b, t, term.lag_b, earliest, step);
      break;
  }
  return term.chinese ? v * bank.chinese : v;
}

double evaluate_outcome(Outcome outcome, const SeriesBank& bank, std::size_t t, std::size_t earliest, int step) {
  const Series s = outcome_series(outcome);
  if (outcome == Outcome::Mobility) return value_at(bank, s, t, 0, earliest, step);
  return value_at(bank, s, t, 0, earliest, step) - value_at(bank, s, t, kSpanDays, earliest, step);
}

PanelDesign build_panel_design(const ObservationPanel& panel, const PanelSpec& spec) {
  spec.validate();
  if (panel.frequency != spec.frequency) throw BuildError("panel frequency does not match the specification");
  if (panel.dates.empty() || panel.countries.empty()) throw BuildError("empty panel");
  const int step = panel.step_days();
  const auto terms = equation_terms(spec);
  if (step != 1) {
    for (const auto& term : terms) {
      if (term.lag_a % step != 0 || term.lag_b % step != 0) {
        throw BuildError("lag of " + term.name + " is not a whole number of weeks in a weekly panel");
      }
    }
  }

  PanelDesign d;
  d.spec = spec;
  d.window = spec.window.value_or(DateRange{panel.dates.front(), panel.dates.back()});
  for (const auto& term : terms) d.names.push_back(term.name);
  const std::size_t n_dates = panel.dates.size();
  std::size_t earliest = n_dates;
  for (std::size_t t = 0; t < n_dates; ++t) {
    if (panel.dates[t] >= d.window.first) {
      earliest = t;
      break;
    }
  }
  const double span = std::max(1, d.window.last - d.window.first);

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  for (std::size_t c = 0; c < panel.countries.size(); ++c) {
    BankFlags flags;
    const SeriesBank bank = make_bank_flags(panel, c, spec.chinese_set, &flags);
    CountryDrops drops;
    bool any = false;
    for (std::size_t t = earliest; t < n_dates && panel.dates[t] <= d.window.last; ++t) {
      ++drops.rows;
      std::vector<double> row(terms.size());
      bool ok = true;
      for (std::size_t j = 0; j < terms.size(); ++j) {
        row[j] = evaluate(terms[j], bank, t, earliest, step);
        ok = ok && !is_missing(row[j]);
      }
      const double y = evaluate_outcome(spec.outcome, bank, t, earliest, step);
      ok = ok && !is_missing(y);
      if (!ok) {
        bool nonpositive = false;
        auto check = [&](Series s, std::size_t at) {
          if (at >= earliest && flags.nonpositive[idx(s)][at]) nonpositive = true;
        };
        for (const auto& term : terms) for_each_reference(term, t, step, check);
        const Series os = outcome_series(spec.outcome);
        check(os, t);
        if (spec.outcome != Outcome::Mobility && t >= static_cast<std::size_t>(kSpanDays / step)) {
          check(os, t - static_cast<std::size_t>(kSpanDays / step));
        }
        ++(nonpositive ? drops.nonpositive : drops.missing);
        continue;
      }
      ++drops.usable;
      any = true;
      rows.push_back(std::move(row));
      ys.push_back(y);
      d.dates.push_back(panel.dates[t]);
      d.tau.push_back(static_cast<double>(panel.dates[t] - d.window.first) / span);
      d.cluster.push_back(d.countries.size());
    }
    d.drops[panel.countries[c]] = drops;
    if (any) d.countries.push_back(panel.countries[c]);
  }
  if (rows.empty()) {
    std::string detail;
    for (const auto& [country, dr] : d.drops) {
      detail += " " + country + "(nonpositive=" + std::to_string(dr.nonpositive) +
                ", missing=" + std::to_string(dr.missing) + ")";
    }
    throw BuildError("design is empty after masking; drops per country:" + detail);
  }
  d.y = Eigen::Map<const VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  d.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(terms.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < terms.size(); ++j) d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  return d;
}

// ---------------------------------------------------------------------------

namespace {

MatrixXd trend_basis(std::span<const double> tau, int degree) {
  MatrixXd b(static_cast<Eigen::Index>(tau.size()), degree + 1);
  for (std::size_t r = 0; r < tau.size(); ++r) {
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      b(static_cast<Eigen::Index>(r), k) = p;
      p *= tau[r];
    }
  }
  return b;
}

struct CountryBlock {
  std::vector<Eigen::Index> rows;
  std::vector<double> tau;
};

}  // namespace

std::vector<Coefficient> PanelFit::table() const {
  std::vector<Coefficient> out;
  const double df = n_clusters - 1;
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    Coefficient c{names[j], coef[i], kMissing, kMissing, kMissing};
    if (inference) {
      c.se = std::sqrt(covariance(i, i));
      c.t = c.estimate / c.se;
      c.p_value = stats::t_two_sided_p(c.t, df);
    }
    out.push_back(c);
  }
  return out;
}

std::optional<std::size_t> PanelFit::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return j;
  }
  return std::nullopt;
}

double PanelFit::country_component(std::string_view country, double tau) const {
  const auto it = country_effects.find(std::string(country));
  if (it == country_effects.end()) throw LookupError("no fixed effect for country '" + std::string(country) + "'");
  double v = 0.0, p = 1.0;
  for (double c : it->second) {
    v += c * p;
    p *= tau;
  }
  return v;
}

PanelFit fit_fe_ols(const PanelDesign& design) {
  const Eigen::Index n = design.x.rows();
  const Eigen::Index k = design.x.cols();
  const int degree = design.spec.trend;
  const std::size_t g = design.countries.size();

  std::vector<CountryBlock> blocks(g);
  for (Eigen::Index r = 0; r < n; ++r) {
    auto& b = blocks[design.cluster[static_cast<std::size_t>(r)]];
    b.rows.push_back(r);
    b.tau.push_back(design.tau[static_cast<std::size_t>(r)]);
  }

  // Project the per-country intercept and trend block out of y and X.
  MatrixXd yx(n, k + 1);
  yx.col(0) = design.y;
  yx.rightCols(k) = design.x;
  MatrixXd within = yx;
  std::vector<Eigen::ColPivHouseholderQR<MatrixXd>> qrs;
  qrs.reserve(g);
  int absorbed = 0;
  for (const auto& b : blocks) {
    const MatrixXd basis = trend_basis(b.tau, degree);
    qrs.emplace_back(basis);
    absorbed += static_cast<int>(qrs.back().rank());
    MatrixXd local(static_cast<Eigen::Index>(b.rows.size()), k + 1);
    for (std::size_t i = 0; i < b.rows.size(); ++i) local.row(static_cast<Eigen::Index>(i)) = yx.row(b.rows[i]);
    const MatrixXd resid = local - basis * qrs.back().solve(local);
    for (std::size_t i = 0; i < b.rows.size(); ++i) within.row(b.rows[i]) = resid.row(static_cast<Eigen::Index>(i));
  }

  const VectorXd yw = within.col(0);
  const MatrixXd xw = within.rightCols(k);
  const auto ls = linalg::least_squares(xw, yw, design.names);

  PanelFit fit;
  fit.spec = design.spec;
  fit.window = design.window;
  fit.names = design.names;
  fit.coef = ls.coef;
  fit.countries = design.countries;
  fit.cluster = design.cluster;
  fit.dates = design.dates;
  fit.residuals = ls.residuals;
  fit.n_obs = static_cast<int>(n);
  fit.n_clusters = static_cast<int>(g);

  // Country intercepts and trend coefficients from the partial residual.
  const VectorXd partial = design.y - design.x * fit.coef;
  std::map<int, int> count_freq;
  for (std::size_t c = 0; c < g; ++c) {
    const auto& b = blocks[c];
    VectorXd local(static_cast<Eigen::Index>(b.rows.size()));
    for (std::size_t i = 0; i < b.rows.size(); ++i) local[static_cast<Eigen::Index>(i)] = partial[b.rows[i]];
    const VectorXd eff = qrs[c].solve(local);
    fit.country_effects[design.countries[c]] = std::vector<double>(eff.data(), eff.data() + eff.size());
    const int rows = static_cast<int>(b.rows.size());
    fit.rows_per_country[design.countries[c]] = rows;
    ++count_freq[rows];
  }
  int best = -1;
  for (const auto& [rows, freq] : count_freq) {
    if (freq > best || (freq == best && rows > fit.obs_per_country)) {
      best = freq;
      fit.obs_per_country = rows;
    }
  }

  const double ssr = fit.residuals.squaredNorm();
  const double tss = (design.y.array() - design.y.mean()).square().sum();
  const double tss_within = yw.squaredNorm();
  fit.r2 = tss > 0 ? 1.0 - ssr / tss : kMissing;
  fit.r2_within = tss_within > 0 ? 1.0 - ssr / tss_within : kMissing;
  const double dof = static_cast<double>(n - k - absorbed);
  fit.adj_r2 = dof > 0 && tss > 0 ? 1.0 - (1.0 - fit.r2) * (static_cast<double>(n) - 1.0) / dof : kMissing;

  if (g < 2) {
    fit.inference = false;
    fit.covariance = MatrixXd::Constant(k, k, kMissing);
    fit.warnings.push_back("fewer than two clusters: cluster-robust inference unavailable");
    return fit;
  }
  MatrixXd meat = MatrixXd::Zero(k, k);
  for (const auto& b : blocks) {
    VectorXd score = VectorXd::Zero(k);
    for (Eigen::Index r : b.rows) score += xw.row(r).transpose() * fit.residuals[r];
    meat += score * score.transpose();
  }
  const double gd = static_cast<double>(g);
  const double nd = static_cast<double>(n);
  const double correction = gd / (gd - 1.0) * (nd - 1.0) / (nd - static_cast<double>(k));
  const MatrixXd cov = correction * ls.xtx_inv * meat * ls.xtx_inv;
  fit.covariance = 0.5 * (cov + cov.transpose());
  return fit;
}

Combination linear_combo(std::span<const std::string> names, const VectorXd& coef, const MatrixXd& covariance,
                         const std::map<std::string, double>& weights) {
  VectorXd w = VectorXd::Zero(coef.size());
  for (const auto& [name, weight] : weights) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw LookupError("unknown coefficient '" + name + "'");
    w[it - names.begin()] += weight;
  }
  Combination c;
  c.estimate = w.dot(coef);
  // Only the rows and columns with nonzero weight enter the variance, so a
  // partially missing covariance does not contaminate unrelated combinations.
  double var = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] == 0.0) continue;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w[j] != 0.0) var += w[i] * covariance(i, j) * w[j];
    }
  }
  c.se = std::sqrt(var);
  return c;
}

Combination linear_combo(const PanelFit& fit, const std::map<std::string, double>& weights) {
  return linear_combo(fit.names, fit.coef, fit.covariance, weights);
}

// ---------------------------------------------------------------------------

std::vector<BatteryEntry> run_spec_battery(const ObservationPanel& panel, const PanelSpec& base,
                                           const BatteryOptions& options, int jobs) {
  std::vector<BatteryEntry> entries;
  entries.push_back({"baseline", base, std::nullopt, ""});
  for (int degree : options.trends) {
    if (degree == base.trend) continue;
    PanelSpec s = base;
    s.trend = degree;
    entries.push_back({"trend=" + std::string(trend_name(degree)), s, std::nullopt, ""});
  }
  for (int shift : options.lag_shifts) {
    if (shift == base.lag_shift) continue;
    PanelSpec s = base;
    s.lag_shift = shift;
    entries.push_back({"lag_shift=" + std::string(shift > 0 ? "+" : "") + std::to_string(shift), s, std::nullopt, ""});
  }
  for (const auto& w : options.windows) {
    PanelSpec s = base;
    s.window = w;
    entries.push_back({"window=" + w.first.to_string() + ":" + w.last.to_string(), s, std::nullopt, ""});
  }
  if (options.weekly) {
    PanelSpec s = base;
    s.frequency = Frequency::Weekly;
    entries.push_back({"weekly", s, std::nullopt, ""});
  }
  if (options.interactions) {
    PanelSpec s = base;
    s.interactions = true;
    entries.push_back({"interactions", s, std::nullopt, ""});
  }
  if (options.extended_chinese) {
    PanelSpec s = base;
    s.chinese_terms = true;
    s.chinese_set = ChineseSet::Extended;
    entries.push_back({"chinese=extended", s, std::nullopt, ""});
  }

  std::optional<ObservationPanel> weekly;
  const bool need_weekly = std::any_of(entries.begin(), entries.end(), [&](const BatteryEntry& e) {
    return e.spec.frequency == Frequency::Weekly && panel.frequency == Frequency::Daily;
  });
  if (need_weekly) weekly = weekly_aggregate(panel).panel;

  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    auto& e = entries[i];
    const ObservationPanel& source =
        e.spec.frequency == Frequency::Weekly && panel.frequency == Frequency::Daily ? *weekly : panel;
    try {
      e.fit = fit_fe_ols(build_panel_design(source, e.spec));
    } catch (const Error& err) {
      e.error = std::string(err.category()) + ": " + err.what();
    }
  });
  return entries;
}

void write_battery_csv(const std::vector<BatteryEntry>& entries, std::ostream& out) {
  out << "variant,coefficient,estimate,se,t,p,n_obs,error\n";
  for (const auto& e : entries) {
    if (!e.fit) {
      out << e.variant << ",,,,,,,\"" << e.error << "\"\n";
      continue;
    }
    for (const auto& c : e.fit->table()) {
      out << e.variant << ',' << c.name << ',' << format_number(c.estimate) << ',' << format_number(c.se) << ','
          << format_number(c.t) << ',' << format_number(c.p_value) << ',' << e.fit->n_obs << ",\n";
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
double get_num(const nlohmann::json& j) { return j.is_null() ? kMissing : j.get<double>(); }

}  // namespace

nlohmann::json to_json(const PanelFit& fit) {
  nlohmann::json coefs = nlohmann::json::array();
  for (const auto& c : fit.table()) {
    coefs.push_back({{"name", c.name}, {"estimate", num(c.estimate)}, {"se", num(c.se)}, {"t", num(c.t)},
                     {"p", num(c.p_value)}, {"stars", stats::stars(c.p_value)}});
  }
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) row.push_back(num(fit.covariance(i, j)));
    cov.push_back(row);
  }
  nlohmann::json effects = nlohmann::json::object();
  for (const auto& [country, v] : fit.country_effects) effects[country] = v;
  nlohmann::json rows{{"country", nlohmann::json::array()}, {"date", nlohmann::json::array()},
                      {"residual", nlohmann::json::array()}};
  for (Eigen::Index r = 0; r < fit.residuals.size(); ++r) {
    rows["country"].push_back(fit.countries[fit.cluster[static_cast<std::size_t>(r)]]);
    rows["date"].push_back(fit.dates[static_cast<std::size_t>(r)].to_string());
    rows["residual"].push_back(num(fit.residuals[r]));
  }
  return {{"spec", to_json(fit.spec)},
          {"window", {fit.window.first.to_string(), fit.window.last.to_string()}},
          {"coefficients", coefs},
          {"covariance", cov},
          {"country_effects", effects},
          {"countries", fit.countries},
          {"rows_per_country", fit.rows_per_country},
          {"obs_per_country", fit.obs_per_country},
          {"n_obs", fit.n_obs},
          {"n_clusters", fit.n_clusters},
          {"r2", num(fit.r2)},
          {"r2_within", num(fit.r2_within)},
          {"adj_r2", num(fit.adj_r2)},
          {"inference", fit.inference},
          {"warnings", fit.warnings},
          {"rows", rows}};
}

PanelFit fit_from_json(const nlohmann::json& j) {
  try {
    PanelFit fit;
    fit.spec = spec_from_json(j.at("spec"));
    fit.window = DateRange{Date::parse(j.at("window")[0].get<std::string>()), Date::parse(j["window"][1].get<std::string>())};
    const auto& coefs = j.at("coefficients");
    const auto k = static_cast<Eigen::Index>(coefs.size());
    fit.coef.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      fit.names.push_back(coefs[static_cast<std::size_t>(i)].at("name").get<std::string>());
      fit.coef[i] = get_num(coefs[static_cast<std::size_t>(i)].at("estimate"));
    }
    fit.covariance.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index c = 0; c < k; ++c)
        fit.covariance(i, c) = get_num(j.at("covariance")[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
    for (const auto& [country, v] : j.at("country_effects").items()) {
      std::vector<double> eff;
      for (const auto& x : v) eff.push_back(get_num(x));
      fit.country_effects[country] = eff;
    }
    fit.countries = j.at("countries").get<std::vector<std::string>>();
    fit.rows_per_country = j.at("rows_per_country").get<std::map<std::string, int>>();
    fit.obs_per_country = j.at("obs_per_country").get<int>();
    fit.n_obs = j.at("n_obs").get<int>();
    fit.n_clusters = j.at("n_clusters").get<int>();
    fit.r2 = get_num(j.at("r2"));
    fit.r2_within = get_num(j.at("r2_within"));
    fit.adj_r2 = get_num(j.at("adj_r2"));
    fit.inference = j.at("inference").get<bool>();
    fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("rows")) {
      const auto& rows = j["rows"];
      const std::size_t n = rows.at("residual").size();
      fit.residuals.resize(static_cast<Eigen::Index>(n));
      for (std::size_t r = 0; r < n; ++r) {
        const auto country = rows["country"][r].get<std::string>();
        const auto it = std::find(fit.countries.begin(), fit.countries.end(), country);
        if (it == fit.countries.end()) throw LookupError("residual row for unknown country " + country);
        fit.cluster.push_back(static_cast<std::size_t>(it - fit.countries.begin()));
        fit.dates.push_back(Date::parse(rows["date"][r].get<std::string>()));
        fit.residuals[static_cast<Eigen::Index>(r)] = get_num(rows["residual"][r]);
      }
    }
    std::vector<std::string> expected;
    for (const auto& term : equation_terms(fit.spec)) expected.push_back(term.name);
    if (fit.names != expected) throw ParseError("fit coefficients do not match its specification");
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed panel fit record: ") + e.what());
  }
}

void write_coefficient_csv(const PanelFit& fit, std::ostream& out) {
  out << "name,estimate,cluster_se,t,p,stars\n";
  for (const auto& c : fit.table()) {
    out << c.name << ',' << format_number(c.estimate) << ',' << format_number(c.se) << ',' << format_number(c.t) << ','
        << format_number(c.p_value) << ',' << stats::stars(c.p_value) << '\n';
  }
}

}  // namespace vacstrat::panel
