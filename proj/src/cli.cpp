#include "vacstrat/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vacstrat/allocation.hpp"
#include "vacstrat/counterfactual.hpp"
#include "vacstrat/countries.hpp"
#include "vacstrat/errors.hpp"
#include "vacstrat/ingest.hpp"
#include "vacstrat/manifest.hpp"
#include "vacstrat/panel.hpp"
#include "vacstrat/stats.hpp"
#include "vacstrat/timeseries.hpp"

namespace vacstrat {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

DateRange parse_window(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InputError("window '" + text + "' must look like YYYY-MM-DD:YYYY-MM-DD");
  DateRange w{Date::parse(text.substr(0, colon)), Date::parse(text.substr(colon + 1))};
  if (w.last < w.first) throw InputError("window '" + text + "' ends before it starts");
  return w;
}

std::vector<int> parse_ints(const std::string& text) {
  std::vector<int> out;
  for (const auto& s : split(text, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw InputError("'" + s + "' is not an integer");
    }
  }
  return out;
}

std::string text_of(const std::string& v) { return v; }
std::string text_of(bool v) { return v ? "true" : "false"; }
std::string text_of(int v) { return std::to_string(v); }
std::string text_of(std::uint64_t v) { return std::to_string(v); }
std::string text_of(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Binds options and remembers how to print their resolved values.
class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& name, T& var, const std::string& help) {
    getters_.emplace_back(name, [&var] { return text_of(var); });
    return app_->add_option("--" + name, var, help)->capture_default_str();
  }
  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    getters_.emplace_back(name, [&var] { return text_of(var); });
    return app_->add_flag("--" + name, var, help);
  }
  std::map<std::string, std::string> resolved() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, get] : getters_) out[name] = get();
    return out;
  }
  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> getters_;
};

struct Common {
  std::string out;
  int jobs = 1;
};

// Output directory bookkeeping for one run.
class Run {
 public:
  Run(std::string subcommand, const std::string& out_dir) : dir_(out_dir) {
    manifest_.subcommand = std::move(subcommand);
    manifest_.started = utc_timestamp();
    if (dir_.empty()) throw InputError("--out is required");
    fs::create_directories(dir_);
  }
  void input(const std::string& path) {
    if (path.empty()) return;
    manifest_.inputs.push_back({path, sha256_file(path)});
  }
  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    f << content;
    f.close();
    manifest_.outputs.push_back({name, sha256_hex(content)});
  }
  void finish(const std::map<std::string, std::string>& config, std::optional<std::uint64_t> seed) {
    manifest_.config = config;
    manifest_.config.erase("out");
    manifest_.seed = seed;
    manifest_.finished = utc_timestamp();
    write_manifest(manifest_, dir_ / "manifest.json");
  }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  RunManifest manifest_;
};

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

ObservationPanel load_panel(const std::string& path) {
  if (path.empty()) throw InputError("--panel is required");
  return read_panel_csv(path);
}

panel::PanelFit load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read fit " + path);
  try {
    return panel::fit_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError("fit " + path + " is not valid JSON: " + e.what());
  }
}

ColumnSchema load_schema(const std::string& path) {
  ColumnSchema schema;
  if (path.empty()) return schema;
  std::ifstream in(path);
  if (!in) throw InputError("cannot read schema " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("schema " + path + " is not valid JSON: " + e.what());
  }
  schema.country_header = j.value("country", schema.country_header);
  schema.date_header = j.value("date", schema.date_header);
  schema.auto_detect = j.value("auto_detect", true);
  if (j.contains("columns")) {
    for (const auto& [logical, header] : j["columns"].items()) {
      bool found = false;
      for (Column c : kRawColumns) {
        if (logical_name(c) == logical) {
          schema.mapped[c] = header.get<std::string>();
          found = true;
        }
      }
      if (!found) throw SchemaError("schema names unknown column '" + logical + "'");
    }
  }
  return schema;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string inputs, countries, window, schema;
  bool weekly = false;
};

void run_ingest(const IngestArgs& a, Run& run) {
  const ColumnSchema schema = load_schema(a.schema);
  run.input(a.schema);
  std::vector<RawSeriesTable> tables;
  for (const auto& path : split(a.inputs, ',')) {
    run.input(path);
    tables.push_back(load_raw(path, schema));
  }
  if (tables.empty()) throw InputError("--inputs names no files");
  std::vector<std::string> countries = a.countries.empty() ? default_panel_countries() : split(a.countries, ',');
  if (a.window.empty()) throw InputError("--window is required");
  const auto built = build_panel(tables, parse_window(a.window), countries);
  run.write("panel.csv", render([&](std::ostream& o) { write_panel_csv(built.panel, o); }));

  json report = to_json(built.coverage);
  json issues = json::array();
  std::size_t unparseable = 0;
  for (const auto& t : tables) {
    unparseable += t.unparseable_cells;
    for (const auto& i : t.issues) {
      issues.push_back({{"country", i.country}, {"date", i.date.to_string()}, {"line", i.line}, {"message", i.message}});
    }
  }
  json out{{"coverage", report}, {"warnings", built.warnings}, {"validation_issues", issues},
           {"unparseable_cells", unparseable}};
  if (a.weekly) {
    const auto weekly = weekly_aggregate(built.panel);
    run.write("panel_weekly.csv", render([&](std::ostream& o) { write_panel_csv(weekly.panel, o); }));
    out["weekly_warnings"] = weekly.warnings;
  }
  run.write("coverage.json", out.dump(2) + "\n");
}

struct AllocArgs {
  double ve1 = 0.0, ve2 = 0.0, stock = 100.0, capacity = 0.0;
  int interval = 21, horizon = 120;
  std::string split = "equal", compare;
};

void run_alloc(const AllocArgs& a, Run& run) {
  const EfficacyProfile profile{a.ve1, a.ve2};
  profile.validate();
  const SplitRule rule = parse_split_rule(a.split);
  const auto sched = simulate_rollout(a.stock, a.capacity, a.interval, a.horizon, rule);
  const auto prot = protection_path(sched, profile);
  run.write("alloc.csv", render([&](std::ostream& o) {
              o << "day,v1,v2,protection\n";
              for (std::size_t d = 0; d < prot.size(); ++d) {
                o << d << ',' << format_number(sched.v1[d]) << ',' << format_number(sched.v2[d]) << ','
                  << format_number(prot[d]) << '\n';
              }
            }));
  json info{{"warnings", sched.warnings}};
  if (!a.compare.empty()) {
    const auto intervals = parse_ints(a.compare);
    std::vector<RolloutSchedule> schedules;
    for (int iv : intervals) schedules.push_back(simulate_rollout(a.stock, a.capacity, iv, a.horizon, rule));
    const auto report = dominance_report(schedules, profile);
    std::vector<std::vector<double>> paths;
    for (const auto& s : schedules) paths.push_back(protection_path(s, profile));
    run.write("dominance.csv", render([&](std::ostream& o) {
                o << "day";
                for (int iv : intervals) o << ",interval_" << iv;
                o << ",longer_interval_dominates\n";
                for (const auto& day : report.days) {
                  o << day.day;
                  for (const auto& p : paths) o << ',' << format_number(p[static_cast<std::size_t>(day.day)]);
                  o << ',' << (day.longer_interval_dominates ? 1 : 0) << '\n';
                }
              }));
    int first = -1;
    for (const auto& day : report.days) {
      if (report.dominates_from(day.day)) {
        first = day.day;
        break;
      }
    }
    info["dominates_from_day"] = first;
  }
  run.write("alloc.json", info.dump(2) + "\n");
}

struct TsArgs {
  std::string panel, country, outcome = "cases", lags;
  int pmax = 3, qmax = 3, restarts = 5;
  std::uint64_t seed = 20210708;
};

void run_ts(const TsArgs& a, Run& run, int jobs) {
  run.input(a.panel);
  const auto panel = load_panel(a.panel);
  const auto outcome = ts::parse_outcome(a.outcome);
  std::optional<ts::LagSpec> lags;
  if (!a.lags.empty()) lags = ts::LagSpec::parse(a.lags, ts::LagSpec::defaults(outcome));
  const auto country = canonical_country(a.country);
  const auto design = ts::build_ts_design(panel, country, outcome, lags);
  ts::FitOptions opt;
  opt.seed = a.seed;
  opt.max_restarts = a.restarts;
  const auto sel = ts::select_order(design, a.pmax, a.qmax, opt, jobs);
  const auto diag = ts::residual_diagnostics(sel.fit);
  json candidates = json::array();
  for (const auto& c : sel.candidates) {
    candidates.push_back({{"order", {c.order.p, c.order.d, c.order.q}},
                          {"aicc", std::isfinite(c.aicc) ? json(c.aicc) : json(nullptr)},
                          {"usable", c.usable},
                          {"note", c.note}});
  }
  json out{{"country", country},
           {"outcome", ts::to_string(outcome)},
           {"fit", ts::to_json(sel.fit)},
           {"diagnostics", ts::to_json(diag)},
           {"candidates", candidates},
           {"regressors", design.names},
           {"uses_total_doses", design.uses_total_doses},
           {"usable_rows", design.usable_rows()},
           {"excluded_rows", design.excluded_rows},
           {"floored_counts", design.floored_counts}};
  run.write("ts_fit.json", out.dump(2) + "\n");
  const auto fitted = ts::fitted_path(sel.fit, design);
  run.write("ts_fitted.csv", render([&](std::ostream& o) {
              o << "date,observed_log,fitted_log,residual\n";
              for (std::size_t t = 0; t < fitted.size(); ++t) {
                const auto i = static_cast<Eigen::Index>(t);
                o << design.dates[t].to_string() << ',' << format_number(design.log_level[i]) << ','
                  << format_number(fitted[t]) << ',' << format_number(sel.fit.residuals[i]) << '\n';
              }
            }));
}

struct SpecArgs {
  std::string panel, outcome = "cases", trend = "none", chinese = "off", window, info;
  int lag_shift = 0;
  bool weekly = false, interactions = false;

  void add(Registry& r) {
    r.option("panel", panel, "canonical panel CSV")->required();
    r.option("outcome", outcome, "cases|deaths|mobility");
    r.option("trend", trend, "none|linear|quadratic|cubic");
    r.option("chinese", chinese, "baseline|extended|off");
    r.option("lag-shift", lag_shift, "days added to both vaccine lags (-3..3)");
    r.option("window", window, "sample window YYYY-MM-DD:YYYY-MM-DD");
    r.flag("weekly", weekly, "estimate on weekly aggregates");
    r.flag("interactions", interactions, "add vaccine x mobility interactions");
    r.option("info", info, "mobility information variables: cases|deaths");
  }

  panel::PanelSpec spec() const {
    panel::PanelSpec s;
    s.outcome = panel::parse_outcome(outcome);
    s.trend = panel::parse_trend(trend);
    s.chinese_terms = chinese != "off";
    if (s.chinese_terms) s.chinese_set = panel::parse_chinese_set(chinese);
    s.lag_shift = lag_shift;
    if (!window.empty()) s.window = parse_window(window);
    s.frequency = weekly ? Frequency::Weekly : Frequency::Daily;
    s.interactions = interactions;
    if (!info.empty()) s.info = panel::parse_info(info);
    s.validate();
    return s;
  }
};

ObservationPanel panel_for(const ObservationPanel& p, const panel::PanelSpec& spec) {
  if (spec.frequency == Frequency::Weekly && p.frequency == Frequency::Daily) return weekly_aggregate(p).panel;
  return p;
}

void run_panel_fit(const SpecArgs& a, Run& run) {
  run.input(a.panel);
  const auto spec = a.spec();
  const auto panel = panel_for(load_panel(a.panel), spec);
  const auto design = panel::build_panel_design(panel, spec);
  const auto fit = panel::fit_fe_ols(design);
  run.write("panel_fit.json", panel::to_json(fit).dump(2) + "\n");
  run.write("coefficients.csv", render([&](std::ostream& o) { panel::write_coefficient_csv(fit, o); }));
  run.write("drops.csv", render([&](std::ostream& o) {
              o << "country,rows,nonpositive,missing,usable\n";
              for (const auto& [c, d] : design.drops) {
                o << c << ',' << d.rows << ',' << d.nonpositive << ',' << d.missing << ',' << d.usable << '\n';
              }
            }));
}

struct BatteryArgs {
  SpecArgs base;
  std::string trends, lag_shifts, windows;
  bool weekly_variant = false, interactions_variant = false, extended_chinese = false;
};

void run_battery(const BatteryArgs& a, Run& run, int jobs) {
  run.input(a.base.panel);
  const auto spec = a.base.spec();
  const auto panel = panel_for(load_panel(a.base.panel), spec);
  panel::BatteryOptions opt;
  for (const auto& t : split(a.trends, ',')) opt.trends.push_back(panel::parse_trend(t));
  opt.lag_shifts = parse_ints(a.lag_shifts);
  for (const auto& w : split(a.windows, ',')) opt.windows.push_back(parse_window(w));
  opt.weekly = a.weekly_variant;
  opt.interactions = a.interactions_variant;
  opt.extended_chinese = a.extended_chinese;
  const auto entries = panel::run_spec_battery(panel, spec, opt, jobs);
  run.write("battery.csv", render([&](std::ostream& o) { panel::write_battery_csv(entries, o); }));
  json arr = json::array();
  for (const auto& e : entries) {
    json item{{"variant", e.variant}, {"spec", panel::to_json(e.spec)}};
    if (e.fit) {
      item["fit"] = panel::to_json(*e.fit);
      item["fit"].erase("rows");
    } else {
      item["error"] = e.error;
    }
    arr.push_back(item);
  }
  run.write("battery.json", arr.dump(2) + "\n");
}

struct CfArgs {
  std::string panel, case_fit, death_fit, mobility_fit, mobility_death_fit, country, outcomes = "cases", windows;
  int interval_weeks = 8, draws = 200;
  double v1_cap = 100.0, population = 1.0;
  std::uint64_t seed = 20210708;
  bool svg = false, point_estimates = false;
};

void run_counterfactual(const CfArgs& a, Run& run, int jobs) {
  for (const auto* p : {&a.panel, &a.case_fit, &a.death_fit, &a.mobility_fit, &a.mobility_death_fit}) run.input(*p);
  const auto panel = load_panel(a.panel);
  cf::Scenario sc;
  sc.country = canonical_country(a.country);
  sc.interval_weeks = a.interval_weeks;
  sc.v1_cap = a.v1_cap;
  sc.draws = a.draws;
  sc.seed = a.seed;
  sc.point_estimates = a.point_estimates;
  sc.population_millions = a.population;
  sc.validate();
  const auto ci = panel.country_index(sc.country);
  if (!ci) throw SimulationError("country " + sc.country + " is not in the panel");
  const auto& s = panel.series[*ci];
  const auto schedule =
      cf::make_schedule(panel.dates, s[PanelColumn::V1], s[PanelColumn::V2], sc.interval_weeks, sc.v1_cap);
  sc.schedule = schedule;
  run.write("schedule.csv", render([&](std::ostream& o) { cf::write_schedule_csv(schedule, o); }));

  std::vector<DateRange> windows;
  for (const auto& w : split(a.windows, ',')) windows.push_back(parse_window(w));
  if (a.mobility_fit.empty()) throw InputError("--mobility-fit is required");
  const auto mobility = load_fit(a.mobility_fit);
  json summary{{"country", sc.country},
               {"interval_weeks", sc.interval_weeks},
               {"v1_cap", sc.v1_cap},
               {"draws", sc.point_estimates ? 1 : sc.draws},
               {"seed", sc.seed},
               {"schedule_warnings", schedule.warnings},
               {"divergence", schedule.divergence ? json(panel.dates[*schedule.divergence].to_string()) : json(nullptr)}};
  const auto outcomes = split(a.outcomes, ',');
  if (outcomes.empty()) throw InputError("--outcomes names no outcome");
  for (const auto& name : outcomes) {
    cf::CounterfactualResult result;
    if (name == "cases") {
      if (a.case_fit.empty()) throw InputError("--case-fit is required for case paths");
      result = cf::simulate_paths(load_fit(a.case_fit), mobility, panel, sc, jobs);
    } else if (name == "deaths") {
      if (a.death_fit.empty()) throw InputError("--death-fit is required for death paths");
      const auto death_mobility = a.mobility_death_fit.empty() ? mobility : load_fit(a.mobility_death_fit);
      result = cf::death_paths(load_fit(a.death_fit), death_mobility, panel, sc, jobs);
    } else {
      throw InputError("unknown outcome '" + name + "' in --outcomes (expected cases,deaths)");
    }
    run.write("cf_" + name + ".csv", render([&](std::ostream& o) { cf::write_result_csv(result, o); }));
    if (a.svg) run.write("cf_" + name + ".svg", render([&](std::ostream& o) { cf::write_svg(result, o); }));
    summary[name] = {{"summary", cf::to_json(cf::summarize(result, windows))},
                     {"observed_fallback_rows", result.observed_fallback_rows},
                     {"warnings", result.warnings}};
  }
  run.write("summary.json", summary.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError("config " + path + " must be a JSON object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) text += (text.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
    } else if (value.is_number_float()) {
      text = text_of(value.get<double>());
    } else {
      text = value.dump();
    }
    tokens.push_back("--" + key + "=" + text);
  }
  return tokens;
}

// Moves --config contents in front of the explicit flags so the latter win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> rest;
  std::vector<std::string> from_config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const auto& a = args[i];
    std::string path;
    if (a == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file argument");
      path = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
    } else {
      rest.push_back(a);
      continue;
    }
    auto t = config_tokens(path);
    from_config.insert(from_config.end(), t.begin(), t.end());
  }
  std::vector<std::string> out{args[0]};
  out.insert(out.end(), from_config.begin(), from_config.end());
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

int reproduce(const std::string& manifest_path, const std::string& out_dir, int jobs, std::ostream& out,
              std::ostream& err) {
  const RunManifest m = read_manifest(manifest_path);
  for (const auto& in : m.inputs) {
    std::string digest;
    try {
      digest = sha256_file(in.path);
    } catch (const InputError&) {
      throw ReproducibilityError("input " + in.path + " is missing");
    }
    if (digest != in.sha256) throw ReproducibilityError("input " + in.path + " does not match its recorded digest");
  }
  fs::path dir = out_dir;
  if (dir.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "vacstrat-reproduce-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw ReproducibilityError("cannot create a temporary directory");
    dir = tmpl;
  }
  std::vector<std::string> args{m.subcommand};
  for (const auto& [key, value] : m.config) {
    if (key == "jobs") continue;
    std::string v = value;
    if (key == "seed" && m.seed) v = std::to_string(*m.seed);
    if (v.empty()) continue;
    args.push_back("--" + key + "=" + v);
  }
  args.push_back("--out=" + dir.string());
  args.push_back("--jobs=" + std::to_string(jobs));
  std::ostringstream sub_out, sub_err;
  const int status = run_cli(args, sub_out, sub_err);
  if (status != 0) {
    err << sub_err.str();
    throw ReproducibilityError("replay of '" + m.subcommand + "' failed with status " + std::to_string(status));
  }
  bool ok = true;
  for (const auto& o : m.outputs) {
    const fs::path p = dir / o.path;
    const std::string digest = fs::exists(p) ? sha256_file(p) : std::string("missing");
    const bool match = digest == o.sha256;
    ok = ok && match;
    out << (match ? "match    " : "MISMATCH ") << o.path << '\n';
  }
  out << "reproduce: " << (ok ? "PASS" : "FAIL") << " (" << dir.string() << ")\n";
  if (!ok) err << "error[reproducibility]: output digests differ from the manifest\n";
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vaccination-strategy analysis toolkit", "vacstrat"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  Common common;
  auto add_common = [&](Registry& r, bool needs_out = true) {
    auto* o = r.option("out", common.out, "output directory");
    if (needs_out) o->required();
    r.option("jobs", common.jobs, "worker threads")->check(CLI::PositiveNumber);
    r.app()->add_option("--config", "JSON file of option values (explicit flags win)");
  };

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "build the canonical panel from raw CSV files");
  Registry ingest_reg(ingest_cmd);
  ingest_reg.option("inputs", ingest.inputs, "comma-separated raw CSV files")->required();
  ingest_reg.option("countries", ingest.countries, "comma-separated countries (default: 37-country panel)");
  ingest_reg.option("window", ingest.window, "YYYY-MM-DD:YYYY-MM-DD")->required();
  ingest_reg.option("schema", ingest.schema, "JSON column mapping");
  ingest_reg.flag("weekly", ingest.weekly, "also write weekly aggregates");
  add_common(ingest_reg);

  AllocArgs alloc;
  auto* alloc_cmd = app.add_subcommand("alloc", "simulate a dose rollout and its protection path");
  Registry alloc_reg(alloc_cmd);
  alloc_reg.option("ve1", alloc.ve1, "first-dose efficacy")->required();
  alloc_reg.option("ve2", alloc.ve2, "full-regimen efficacy")->required();
  alloc_reg.option("stock", alloc.stock, "doses available per hundred");
  alloc_reg.option("capacity", alloc.capacity, "doses per hundred per day")->required();
  alloc_reg.option("interval", alloc.interval, "days between doses");
  alloc_reg.option("horizon", alloc.horizon, "days simulated");
  alloc_reg.option("split", alloc.split, "equal|due-priority");
  alloc_reg.option("compare", alloc.compare, "comma-separated intervals for a dominance table");
  add_common(alloc_reg);

  TsArgs tsa;
  auto* ts_cmd = app.add_subcommand("ts-fit", "fit a per-country ARIMA-X model");
  Registry ts_reg(ts_cmd);
  ts_reg.option("panel", tsa.panel, "canonical panel CSV")->required();
  ts_reg.option("country", tsa.country, "country name or ISO3 code")->required();
  ts_reg.option("outcome", tsa.outcome, "cases|deaths");
  ts_reg.option("pmax", tsa.pmax, "largest AR order searched")->check(CLI::NonNegativeNumber);
  ts_reg.option("qmax", tsa.qmax, "largest MA order searched")->check(CLI::NonNegativeNumber);
  ts_reg.option("lags", tsa.lags, "lag overrides, e.g. v1=28,p=21");
  ts_reg.option("restarts", tsa.restarts, "random restarts per order")->check(CLI::NonNegativeNumber);
  ts_reg.option("seed", tsa.seed, "restart seed");
  add_common(ts_reg);

  SpecArgs pf;
  auto* pf_cmd = app.add_subcommand("panel-fit", "fixed-effects panel regression");
  Registry pf_reg(pf_cmd);
  pf.add(pf_reg);
  add_common(pf_reg);

  BatteryArgs bat;
  auto* bat_cmd = app.add_subcommand("battery", "robustness battery around a base specification");
  Registry bat_reg(bat_cmd);
  bat.base.add(bat_reg);
  bat_reg.option("trends", bat.trends, "comma-separated trend variants");
  bat_reg.option("lag-shifts", bat.lag_shifts, "comma-separated vaccine lag shifts");
  bat_reg.option("windows", bat.windows, "comma-separated alternative windows");
  bat_reg.flag("weekly-variant", bat.weekly_variant, "add a weekly-frequency variant");
  bat_reg.flag("interactions-variant", bat.interactions_variant, "add an interaction variant");
  bat_reg.flag("extended-chinese", bat.extended_chinese, "add the extended Chinese-vaccine set variant");
  add_common(bat_reg);

  CfArgs cfa;
  auto* cf_cmd = app.add_subcommand("counterfactual", "simulate an alternative dosing-interval schedule");
  Registry cf_reg(cf_cmd);
  cf_reg.option("panel", cfa.panel, "canonical panel CSV")->required();
  cf_reg.option("case-fit", cfa.case_fit, "cases equation fit JSON");
  cf_reg.option("death-fit", cfa.death_fit, "deaths equation fit JSON");
  cf_reg.option("mobility-fit", cfa.mobility_fit, "mobility equation fit JSON (case information)");
  cf_reg.option("mobility-death-fit", cfa.mobility_death_fit, "mobility equation fit JSON (death information)");
  cf_reg.option("country", cfa.country, "scenario country")->required();
  cf_reg.option("interval-weeks", cfa.interval_weeks, "hypothetical dosing interval in weeks");
  cf_reg.option("v1-cap", cfa.v1_cap, "first-dose coverage cap per hundred");
  cf_reg.option("draws", cfa.draws, "parameter draws");
  cf_reg.option("seed", cfa.seed, "draw seed");
  cf_reg.option("outcomes", cfa.outcomes, "cases,deaths");
  cf_reg.option("windows", cfa.windows, "comma-separated summary sub-windows");
  cf_reg.option("population", cfa.population, "population in millions for level outputs");
  cf_reg.flag("svg", cfa.svg, "write SVG charts");
  cf_reg.flag("point-estimates", cfa.point_estimates, "single replication at the estimates");
  add_common(cf_reg);

  std::string manifest_path;
  auto* rep_cmd = app.add_subcommand("reproduce", "replay a run from its manifest and compare digests");
  Registry rep_reg(rep_cmd);
  rep_reg.option("manifest", manifest_path, "manifest.json of the run")->required();
  add_common(rep_reg, false);

  if (raw_args.empty()) {
    out << app.help();
    return 2;
  }
  try {
    auto args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << "error[" << e.category() << "]: " << e.what() << '\n';
    return 2;
  }

  try {
    if (rep_cmd->parsed()) return reproduce(manifest_path, common.out, common.jobs, out, err);

    const std::string name = app.get_subcommands().front()->get_name();
    Run run(name, common.out);
    std::optional<std::uint64_t> seed;
    const Registry* reg = nullptr;
    if (ingest_cmd->parsed()) {
      run_ingest(ingest, run);
      reg = &ingest_reg;
    } else if (alloc_cmd->parsed()) {
      run_alloc(alloc, run);
      reg = &alloc_reg;
    } else if (ts_cmd->parsed()) {
      run_ts(tsa, run, common.jobs);
      seed = tsa.seed;
      reg = &ts_reg;
    } else if (pf_cmd->parsed()) {
      run_panel_fit(pf, run);
      reg = &pf_reg;
    } else if (bat_cmd->parsed()) {
      run_battery(bat, run, common.jobs);
      reg = &bat_reg;
    } else if (cf_cmd->parsed()) {
      run_counterfactual(cfa, run, common.jobs);
      seed = cfa.seed;
      reg = &cf_reg;
    }
    run.finish(reg->resolved(), seed);
    out << "wrote " << run.dir().string() << '\n';
    return 0;
  } catch (const Error& e) {
    err << "error[" << e.category() << "]: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[io]: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace vacstrat
