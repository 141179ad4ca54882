#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "tvemi/cox_tve.hpp"
#include "tvemi/csv.hpp"
#include "tvemi/errors.hpp"
#include "tvemi/mi_approx.hpp"
#include "tvemi/mi_smc.hpp"
#include "tvemi/model_io.hpp"
#include "tvemi/pool.hpp"
#include "tvemi/sim.hpp"
#include "tvemi/stats.hpp"

using nlohmann::json;
using namespace tvemi;

namespace {

constexpr const char* kToolVersion = "1.0.0";

std::string out_path(const std::string& dir, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "'");
  return (std::filesystem::path(dir) / name).string();
}

void write_manifest(const std::string& dir, json manifest) {
  manifest["tool_version"] = kToolVersion;
  write_text_file(out_path(dir, "manifest.json"), manifest.dump(2) + "\n");
}

WaldMode parse_wald(const std::string& s) {
  if (s == "chisq") return WaldMode::ChiSquare;
  if (s == "d1") return WaldMode::D1;
  throw ConfigError("--wald must be 'chisq' or 'd1'");
}

struct DataOptions {
  std::string path;
  std::vector<std::string> binary, continuous;

  SurvivalDataset load() const {
    CsvOverrides ov;
    ov.binary = binary;
    ov.continuous = continuous;
    return read_dataset_csv(path, ov);
  }
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--data", opts.path, "input dataset CSV")->required();
  cmd->add_option("--binary", opts.binary,
                  "treat this covariate column as binary");
  cmd->add_option("--continuous", opts.continuous,
                  "treat this covariate column as continuous");
}

struct MiOptions {
  std::string method = "approx";
  int m = 10;
  std::uint64_t seed = 1;
  int fcs_iterations = 10;
  int rejection_cap = 1000;
  bool include_h1 = false;
  bool include_interactions = false;

  MiConfig to_config() const {
    if (method != "approx" && method != "smc")
      throw ConfigError("--method must be 'approx' or 'smc'");
    MiConfig c;
    c.m = m;
    c.seed = seed;
    c.fcs_iterations = fcs_iterations;
    c.rejection_cap = rejection_cap;
    c.include_h1 = include_h1;
    c.include_interactions = include_interactions;
    return c;
  }

  ImputedDatasets run(const SurvivalDataset& ds,
                      const std::vector<TveSpec>& specs) const {
    const MiConfig c = to_config();
    return method == "approx" ? impute_approx(ds, specs, c)
                              : impute_smc(ds, specs, c);
  }
};

void add_mi_options(CLI::App* cmd, MiOptions& opts) {
  cmd->add_option("--method", opts.method, "imputation method: approx or smc");
  cmd->add_option("--m", opts.m, "number of imputations");
  cmd->add_option("--seed", opts.seed, "random seed");
  cmd->add_option("--fcs-iterations", opts.fcs_iterations,
                  "chained-equation sweeps per imputation");
  cmd->add_option("--rejection-cap", opts.rejection_cap,
                  "max proposals per missing cell (smc)");
  cmd->add_flag("--include-h1", opts.include_h1,
                "add the first-moment cumulative-hazard column (approx)");
  cmd->add_flag("--include-interactions", opts.include_interactions,
                "add covariate x hazard interaction columns (approx)");
}

json mi_options_json(const MiOptions& o) {
  return json{{"method", o.method},
              {"m", o.m},
              {"seed", o.seed},
              {"fcs_iterations", o.fcs_iterations},
              {"rejection_cap", o.rejection_cap},
              {"include_h1", o.include_h1},
              {"include_interactions", o.include_interactions}};
}

json diagnostics_json(const ImputationDiagnostics& d) {
  return json{{"warnings", d.warnings},
              {"fcs_iterations", d.fcs_iterations},
              {"total_cells", d.total_cells},
              {"total_proposals", d.total_proposals},
              {"rejection_cap_hits", d.rejection_cap_hits},
              {"event_acceptance_evaluations", d.event_acceptance_evaluations},
              {"event_acceptance_clamped", d.event_acceptance_clamped}};
}

// --tve name=form with form in {constant, linear, rcs3, rcs4, rcs5,
// rcs:<knots>, step:<cuts>}; rcsN places knots at fixed percentiles of the
// observed event times.
TveSpec resolve_form(const std::string& form, const SurvivalDataset& ds) {
  if (form == "rcs3" || form == "rcs4" || form == "rcs5")
    return TveSpec::rcs(
        select_knots(observed_event_times(ds), form[3] - '0'));
  return parse_tve_spec(form);
}

std::vector<TveSpec> resolve_specs(const SurvivalDataset& ds,
                                   const std::vector<std::string>& flags,
                                   const std::string& default_form) {
  std::vector<std::string> forms(ds.p(), default_form);
  for (const std::string& flag : flags) {
    const std::size_t eq = flag.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--tve expects <covariate>=<form>, got '" + flag + "'");
    const std::string name = flag.substr(0, eq);
    int idx = -1;
    for (Eigen::Index k = 0; k < ds.p(); ++k)
      if (ds.covariates[k].name == name) idx = static_cast<int>(k);
    if (idx < 0)
      throw ConfigError("--tve names unknown covariate '" + name + "'");
    forms[idx] = flag.substr(eq + 1);
  }
  std::vector<TveSpec> specs;
  specs.reserve(forms.size());
  for (const std::string& f : forms) specs.push_back(resolve_form(f, ds));
  return specs;
}

json specs_json(const SurvivalDataset& ds, const std::vector<TveSpec>& specs) {
  json out = json::object();
  for (Eigen::Index k = 0; k < ds.p(); ++k)
    out[ds.covariates[k].name] = to_string(specs[k]);
  return out;
}

std::string csv_cell(const std::string& value) {
  if (value.find(',') == std::string::npos) return value;
  return '"' + value + '"';
}

std::string safe_name(const std::string& name) {
  std::string out;
  for (const char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' ||
            c == '-')
               ? c
               : '_';
  return out.empty() ? std::string("covariate") : out;
}

std::string curve_csv(const std::vector<std::string>& names,
                      const std::vector<TveCurve>& curves) {
  std::string out = "covariate,t,estimate,lower95,upper95,extrapolated\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const TveCurve& c = curves[k];
    for (Eigen::Index i = 0; i < c.times.size(); ++i) {
      out += names[k];
      out += ',';
      out += format_double(c.times[i]);
      out += ',';
      out += format_double(c.estimate[i]);
      out += ',';
      out += format_double(c.lower95[i]);
      out += ',';
      out += format_double(c.upper95[i]);
      out += ',';
      out += c.extrapolated[i] ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  int scenario = 1;
  std::string design = "binary";
  Eigen::Index n = 2000;
  double lambda_event = 0.0;
  double lambda_dropout = -1.0;
  double event_frac = 0.10;
  double dropout_frac = 0.50;
  double admin = 10.0;
  Eigen::Index pilot_n = 20000;
  std::string missingness = "none";
  std::uint64_t seed = 1;
  std::string out_dir = ".";
};

void run_simulate(const SimulateOptions& o) {
  const CovariateDesign design = parse_covariate_design(o.design);
  const Missingness mech = parse_missingness(o.missingness);

  ScenarioConfig cfg;
  cfg.scenario = o.scenario;
  cfg.design = design;
  cfg.n_subjects = o.n;
  cfg.admin_censor = o.admin;

  json manifest{{"command", "simulate"}};
  const bool have_event = o.lambda_event > 0.0;
  const bool have_dropout = o.lambda_dropout >= 0.0;
  if (have_event != have_dropout)
    throw ConfigError(
        "provide both --lambda-event and --lambda-dropout, or neither "
        "(rates are then calibrated to the target fractions)");
  if (have_event) {
    cfg.lambda_event = o.lambda_event;
    cfg.lambda_dropout = o.lambda_dropout;
  } else {
    CalibrationTargets targets{o.event_frac, o.dropout_frac};
    const CalibrationResult cal = calibrate_rates(
        o.scenario, design, targets, o.admin, o.seed, o.pilot_n);
    cfg.lambda_event = cal.lambda_event;
    cfg.lambda_dropout = cal.lambda_dropout;
    manifest["calibration"] = {{"rounds", cal.rounds},
                               {"achieved_event", cal.achieved_event},
                               {"achieved_dropout", cal.achieved_dropout},
                               {"pilot_n", o.pilot_n}};
  }

  Rng rng = Rng::stream(o.seed, 1);
  SurvivalDataset ds = generate_dataset(cfg, rng);
  ds = apply_missingness(ds, mech, rng);
  write_dataset_csv(ds, out_path(o.out_dir, "dataset.csv"));

  manifest["config"] = {{"scenario", o.scenario},
                        {"design", o.design},
                        {"n", o.n},
                        {"lambda_event", cfg.lambda_event},
                        {"lambda_dropout", cfg.lambda_dropout},
                        {"admin_censor", o.admin},
                        {"missingness", o.missingness},
                        {"seed", o.seed}};
  manifest["outputs"] = {"dataset.csv"};
  write_manifest(o.out_dir, manifest);
}

// ------------------------------------------------------------------ impute

struct ImputeOptions {
  DataOptions data;
  MiOptions mi;
  std::vector<std::string> tve;
  std::string out_dir = ".";
};

void run_impute(const ImputeOptions& o) {
  const SurvivalDataset ds = o.data.load();
  const std::vector<TveSpec> specs = resolve_specs(ds, o.tve, "constant");
  const ImputedDatasets imputed = o.mi.run(ds, specs);
  write_imputations_csv(imputed, out_path(o.out_dir, "imputations.csv"));

  json manifest{{"command", "impute"},
                {"config", mi_options_json(o.mi)},
                {"input", o.data.path},
                {"specs", specs_json(ds, specs)},
                {"diagnostics", diagnostics_json(imputed.diagnostics)},
                {"outputs", {"imputations.csv"}}};
  write_manifest(o.out_dir, manifest);
}

// --------------------------------------------------------------- fit / ph

struct FitOptions {
  DataOptions data;
  MiOptions mi;
  std::vector<std::string> tve;
  std::string wald = "chisq";
  double alpha = 0.05;
  bool have_method = false;
  std::string out_dir = ".";
};

bool dataset_complete(const SurvivalDataset& ds) {
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (!ds.row_complete(i)) return false;
  return true;
}

void require_method_for_missing(const FitOptions& o, bool complete) {
  if (!complete && !o.have_method)
    throw DataError(
        "dataset has missing covariate cells; pass --method approx|smc to "
        "impute before fitting");
}

void run_fit(const FitOptions& o) {
  const SurvivalDataset ds = o.data.load();
  const std::vector<TveSpec> specs = resolve_specs(ds, o.tve, "constant");
  const bool complete = dataset_complete(ds);
  require_method_for_missing(o, complete);

  std::vector<std::string> names;
  for (const auto& info : ds.covariates) names.push_back(info.name);
  json manifest{{"command", "fit"},
                {"input", o.data.path},
                {"specs", specs_json(ds, specs)}};
  std::vector<TveCurve> curves;

  if (complete) {
    const CoxTveModel model = fit_cox_tve(ds, specs);
    write_text_file(out_path(o.out_dir, "model.txt"), model_to_text(model));
    for (Eigen::Index k = 0; k < ds.p(); ++k)
      curves.push_back(tve_curve(model, static_cast<int>(k)));
    manifest["fit"] = {{"pooled", false},
                       {"log_partial_likelihood", model.log_partial_likelihood},
                       {"n_subjects", model.n_subjects},
                       {"n_events", model.n_events},
                       {"newton_iterations", model.newton_iterations}};
    manifest["outputs"] = {"model.txt", "curves.csv"};
  } else {
    const ImputedDatasets imputed = o.mi.run(ds, specs);
    const PooledFit fit = pooled_cox_tve(imputed, specs);
    write_text_file(out_path(o.out_dir, "model.txt"), pooled_to_text(fit));
    const Eigen::VectorXd grid =
        Eigen::VectorXd::LinSpaced(100, 0.0, fit.t99);
    for (Eigen::Index k = 0; k < ds.p(); ++k)
      curves.push_back(pooled_tve_curve(fit, static_cast<int>(k), grid));
    manifest["fit"] = {{"pooled", true}, {"m", imputed.m()}};
    manifest["imputation"] = mi_options_json(o.mi);
    manifest["diagnostics"] = diagnostics_json(imputed.diagnostics);
    manifest["outputs"] = {"model.txt", "curves.csv"};
  }
  write_text_file(out_path(o.out_dir, "curves.csv"), curve_csv(names, curves));
  write_manifest(o.out_dir, manifest);
}

void run_ph_test(const FitOptions& o) {
  const SurvivalDataset ds = o.data.load();
  const std::vector<TveSpec> specs = resolve_specs(ds, o.tve, "rcs5");
  const WaldMode mode = parse_wald(o.wald);
  bool any_tve = false;
  for (const TveSpec& s : specs)
    any_tve = any_tve || s.form() != TveSpec::Form::Constant;
  if (!any_tve)
    throw ConfigError(
        "ph-test needs at least one time-varying spec (default rcs5)");
  const bool complete = dataset_complete(ds);
  require_method_for_missing(o, complete);

  std::string table = "covariate,spec,statistic,df1,df2,p_value,reject\n";
  json manifest{{"command", "ph-test"},
                {"input", o.data.path},
                {"specs", specs_json(ds, specs)},
                {"alpha", o.alpha},
                {"wald", o.wald}};
  const auto add_row = [&](const std::string& name, const TveSpec& spec,
                           double stat, double df1, double df2, double p) {
    table += name + ',' + csv_cell(to_string(spec)) + ',' +
             format_double(stat) + ',' +
             format_double(df1) + ',' +
             (df2 > 0.0 ? format_double(df2) : std::string("NA")) + ',' +
             format_double(p) + ',' + (p < o.alpha ? "1" : "0") + '\n';
  };

  if (complete) {
    const CoxTveModel model = fit_cox_tve(ds, specs);
    for (Eigen::Index k = 0; k < ds.p(); ++k) {
      if (specs[k].form() == TveSpec::Form::Constant) continue;
      const WaldTest t = ph_wald_test(model, static_cast<int>(k));
      add_row(ds.covariates[k].name, specs[k], t.statistic, t.df, 0.0,
              t.p_value);
    }
    manifest["pooled"] = false;
  } else {
    const ImputedDatasets imputed = o.mi.run(ds, specs);
    const PooledFit fit = pooled_cox_tve(imputed, specs);
    for (Eigen::Index k = 0; k < ds.p(); ++k) {
      if (specs[k].form() == TveSpec::Form::Constant) continue;
      const PooledWaldTest t = pooled_ph_test(fit, static_cast<int>(k), mode);
      add_row(ds.covariates[k].name, specs[k], t.statistic, t.df1, t.df2,
              t.p_value);
    }
    manifest["pooled"] = true;
    manifest["imputation"] = mi_options_json(o.mi);
    manifest["diagnostics"] = diagnostics_json(imputed.diagnostics);
  }
  write_text_file(out_path(o.out_dir, "ph_tests.csv"), table);
  manifest["outputs"] = {"ph_tests.csv"};
  write_manifest(o.out_dir, manifest);
}

// ------------------------------------------------------------------ select

struct SelectCmdOptions {
  DataOptions data;
  MiOptions mi;
  double alpha = 0.01;
  std::string wald = "chisq";
  bool knots_all_times = false;
  std::string out_dir = ".";
};

void run_select(const SelectCmdOptions& o) {
  if (o.mi.m < 2)
    throw ConfigError("select pools across imputations and needs --m >= 2");
  const SurvivalDataset ds = o.data.load();
  // step 1: impute under 5-knot spline effects for every covariate
  const std::vector<TveSpec> impute_specs(
      ds.p(), TveSpec::rcs(select_knots(observed_event_times(ds), 5)));
  const ImputedDatasets imputed = o.mi.run(ds, impute_specs);

  SelectOptions sel;
  sel.alpha = o.alpha;
  sel.wald_mode = parse_wald(o.wald);
  sel.knots_from_all_times = o.knots_all_times;
  const SelectionResult result = mi_mtve_select(imputed, sel);

  std::string trace = "step,covariate,spec,p_value,accepted,note\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const SelectionStep& s = result.trace[i];
    std::string note = s.note;
    std::replace(note.begin(), note.end(), ',', ';');
    trace += std::to_string(i + 1) + ',' +
             result.covariate_names[s.covariate] + ',' +
             csv_cell(to_string(s.spec)) + ',' + format_double(s.p_value) +
             ',' + (s.accepted ? "1" : "0") + ',' + note + '\n';
  }
  write_text_file(out_path(o.out_dir, "selection_trace.csv"), trace);
  write_text_file(out_path(o.out_dir, "final_model.txt"),
                  pooled_to_text(result.final_fit));

  json outputs = {"selection_trace.csv", "final_model.txt"};
  const Eigen::VectorXd grid =
      Eigen::VectorXd::LinSpaced(100, 0.0, result.final_fit.t99);
  for (std::size_t k = 0; k < result.final_specs.size(); ++k) {
    if (result.final_specs[k].form() == TveSpec::Form::Constant) continue;
    const std::string file =
        "tve_curve_" + safe_name(result.covariate_names[k]) + ".csv";
    const std::vector<std::string> one_name{result.covariate_names[k]};
    const std::vector<TveCurve> one_curve{
        pooled_tve_curve(result.final_fit, static_cast<int>(k), grid)};
    write_text_file(out_path(o.out_dir, file), curve_csv(one_name, one_curve));
    outputs.push_back(file);
  }

  json final_specs = json::object();
  for (std::size_t k = 0; k < result.final_specs.size(); ++k)
    final_specs[result.covariate_names[k]] = to_string(result.final_specs[k]);
  json manifest{{"command", "select"},
                {"input", o.data.path},
                {"alpha", o.alpha},
                {"wald", o.wald},
                {"imputation", mi_options_json(o.mi)},
                {"diagnostics", diagnostics_json(imputed.diagnostics)},
                {"final_specs", final_specs},
                {"outputs", outputs}};
  write_manifest(o.out_dir, manifest);
}

// --------------------------------------------------------------- replicate

struct ReplicateOptions {
  std::string config_path;
  std::string out_dir = ".";
};

template <class T>
T config_field(const json& j, const std::string& key, const char* type_name) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + key + "' must be " + type_name);
  }
}

template <class T>
T config_field_or(const json& j, const std::string& key, const T& fallback,
                  const char* type_name) {
  if (!j.contains(key)) return fallback;
  return config_field<T>(j, key, type_name);
}

void run_replicate(const ReplicateOptions& o) {
  json raw;
  try {
    raw = json::parse(read_text_file(o.config_path));
  } catch (const json::exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  if (!raw.is_object()) throw ConfigError("config: top level must be an object");

  static const std::vector<std::string> known{
      "scenario",       "design",        "n",
      "admin_censor",   "lambda_event",  "lambda_dropout",
      "event_fraction", "dropout_fraction", "pilot_n",
      "reps",           "m",             "methods",
      "missingness",    "seed",          "fcs_iterations",
      "rejection_cap",  "alpha",         "wald",
      "include_h1",     "include_interactions", "n_knots",
      "threads"};
  for (const auto& [key, value] : raw.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("config: unknown key '" + key + "'");
  }

  StudyConfig cfg;
  cfg.scenario.scenario = config_field<int>(raw, "scenario", "an integer");
  cfg.scenario.design = parse_covariate_design(
      config_field<std::string>(raw, "design", "a string"));
  cfg.scenario.n_subjects =
      config_field_or<Eigen::Index>(raw, "n", 2000, "an integer");
  cfg.scenario.admin_censor =
      config_field_or<double>(raw, "admin_censor", 10.0, "a number");
  cfg.reps = config_field<int>(raw, "reps", "an integer");
  cfg.m_imputations = config_field_or<int>(raw, "m", 5, "an integer");
  cfg.missingness = parse_missingness(config_field_or<std::string>(
      raw, "missingness", "standard30", "a string"));
  cfg.seed = config_field_or<std::uint64_t>(raw, "seed", 1, "an integer");
  cfg.fcs_iterations =
      config_field_or<int>(raw, "fcs_iterations", 10, "an integer");
  cfg.rejection_cap =
      config_field_or<int>(raw, "rejection_cap", 1000, "an integer");
  cfg.alpha = config_field_or<double>(raw, "alpha", 0.05, "a number");
  cfg.wald_mode = parse_wald(
      config_field_or<std::string>(raw, "wald", "chisq", "a string"));
  cfg.include_h1 = config_field_or<bool>(raw, "include_h1", false, "a boolean");
  cfg.include_interactions =
      config_field_or<bool>(raw, "include_interactions", false, "a boolean");
  cfg.n_knots = config_field_or<int>(raw, "n_knots", 5, "an integer");
  cfg.threads = config_field_or<int>(raw, "threads", 0, "an integer");
  for (const std::string& name : config_field_or<std::vector<std::string>>(
           raw, "methods", {}, "a list of method names"))
    cfg.methods.push_back(parse_method(name));
  if (cfg.scenario.scenario < 1 || cfg.scenario.scenario > 5)
    throw ConfigError("config: field 'scenario' must be 1..5");
  if (cfg.reps < 1) throw ConfigError("config: field 'reps' must be >= 1");

  json manifest{{"command", "replicate"}};
  const bool have_rates =
      raw.contains("lambda_event") || raw.contains("lambda_dropout");
  if (have_rates) {
    cfg.scenario.lambda_event =
        config_field<double>(raw, "lambda_event", "a number");
    cfg.scenario.lambda_dropout =
        config_field<double>(raw, "lambda_dropout", "a number");
  } else {
    CalibrationTargets targets;
    targets.event_fraction =
        config_field_or<double>(raw, "event_fraction", 0.10, "a number");
    targets.dropout_fraction =
        config_field_or<double>(raw, "dropout_fraction", 0.50, "a number");
    const auto pilot = config_field_or<Eigen::Index>(raw, "pilot_n", 20000,
                                                     "an integer");
    const CalibrationResult cal =
        calibrate_rates(cfg.scenario.scenario, cfg.scenario.design, targets,
                        cfg.scenario.admin_censor, cfg.seed, pilot);
    cfg.scenario.lambda_event = cal.lambda_event;
    cfg.scenario.lambda_dropout = cal.lambda_dropout;
    manifest["calibration"] = {{"rounds", cal.rounds},
                               {"achieved_event", cal.achieved_event},
                               {"achieved_dropout", cal.achieved_dropout},
                               {"pilot_n", pilot}};
  }

  const PerformanceReport report = run_replication_study(cfg);
  write_text_file(out_path(o.out_dir, "summary.csv"), summary_csv(report));
  write_text_file(out_path(o.out_dir, "curves.csv"), curves_csv(report));

  json methods = json::array();
  bool any_failures = false;
  for (const MethodReport& mr : report.methods) {
    methods.push_back(json{{"method", to_string(mr.method)},
                           {"reps_used", mr.n_reps_used},
                           {"reps_failed", mr.n_reps_failed},
                           {"failures", mr.failures}});
    any_failures = any_failures || mr.n_reps_failed > 0;
  }
  json method_names = json::array();
  for (const Method m : cfg.methods) method_names.push_back(to_string(m));
  manifest["config"] = {
      {"scenario", cfg.scenario.scenario},
      {"design", to_string(cfg.scenario.design)},
      {"n", cfg.scenario.n_subjects},
      {"admin_censor", cfg.scenario.admin_censor},
      {"lambda_event", cfg.scenario.lambda_event},
      {"lambda_dropout", cfg.scenario.lambda_dropout},
      {"reps", cfg.reps},
      {"m", cfg.m_imputations},
      {"methods", method_names},
      {"missingness", to_string(cfg.missingness)},
      {"seed", cfg.seed},
      {"fcs_iterations", cfg.fcs_iterations},
      {"rejection_cap", cfg.rejection_cap},
      {"alpha", cfg.alpha},
      {"wald", cfg.wald_mode == WaldMode::D1 ? "d1" : "chisq"},
      {"include_h1", cfg.include_h1},
      {"include_interactions", cfg.include_interactions},
      {"n_knots", cfg.n_knots},
      {"threads", cfg.threads}};
  manifest["methods"] = methods;
  manifest["outputs"] = {"summary.csv", "curves.csv"};
  write_manifest(o.out_dir, manifest);

  if (any_failures) {
    std::cerr << "replicate: some replications failed; see manifest.json\n";
    throw NumericError("replication study had per-rep failures");
  }
}

// ------------------------------------------------------------------ report

struct ReportOptions {
  DataOptions data;
  std::string out_dir = ".";
};

void run_report(const ReportOptions& o) {
  const SurvivalDataset ds = o.data.load();
  std::string out = "metric,covariate,value\n";
  const auto row = [&](const std::string& metric, const std::string& cov,
                       const std::string& value) {
    out += metric + ',' + cov + ',' + value + '\n';
  };
  const Eigen::Index n = ds.n();
  int events = 0;
  std::vector<double> times(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    events += ds.event[i];
    times[i] = ds.time[i];
  }
  std::sort(times.begin(), times.end());
  row("n_subjects", "", std::to_string(n));
  row("n_events", "", std::to_string(events));
  row("event_fraction", "",
      format_double(static_cast<double>(events) / static_cast<double>(n)));
  row("time_median", "", format_double(quantile_type7(times, 0.5)));
  row("time_q99", "", format_double(quantile_type7(times, 0.99)));
  row("max_time", "", format_double(times.back()));
  row("n_distinct_event_times", "",
      std::to_string(observed_event_times(ds).size()));
  for (Eigen::Index k = 0; k < ds.p(); ++k) {
    const std::string& name = ds.covariates[k].name;
    Eigen::Index observed = 0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (ds.observed(i, k)) {
        ++observed;
        sum += ds.x(i, k);
      }
    row("kind", name,
        ds.covariates[k].kind == CovariateKind::Binary ? "binary"
                                                       : "continuous");
    row("missing_pct", name,
        format_double(100.0 * static_cast<double>(n - observed) /
                      static_cast<double>(n)));
    row("observed_mean", name,
        format_double(observed > 0
                          ? sum / static_cast<double>(observed)
                          : std::numeric_limits<double>::quiet_NaN()));
  }
  write_text_file(out_path(o.out_dir, "report.csv"), out);
  write_manifest(o.out_dir, json{{"command", "report"},
                                 {"input", o.data.path},
                                 {"outputs", {"report.csv"}}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"survival analysis with time-varying effects and multiple "
               "imputation for missing covariates"};
  app.require_subcommand(1);

  SimulateOptions sim_opts;
  CLI::App* sim = app.add_subcommand(
      "simulate", "generate a synthetic cohort under a study scenario");
  sim->add_option("--scenario", sim_opts.scenario, "scenario id 1..5");
  sim->add_option("--design", sim_opts.design, "binary or continuous");
  sim->add_option("--n", sim_opts.n, "number of subjects");
  sim->add_option("--lambda-event", sim_opts.lambda_event,
                  "event hazard rate (omit to calibrate)");
  sim->add_option("--lambda-dropout", sim_opts.lambda_dropout,
                  "dropout hazard rate (omit to calibrate)");
  sim->add_option("--event-frac", sim_opts.event_frac,
                  "calibration target event fraction");
  sim->add_option("--dropout-frac", sim_opts.dropout_frac,
                  "calibration target dropout fraction");
  sim->add_option("--admin", sim_opts.admin, "administrative censoring time");
  sim->add_option("--pilot-n", sim_opts.pilot_n, "calibration pilot size");
  sim->add_option("--missingness", sim_opts.missingness,
                  "none, standard30, outcome_dependent, or low10");
  sim->add_option("--seed", sim_opts.seed, "random seed");
  sim->add_option("--out-dir", sim_opts.out_dir, "output directory");
  sim->callback([&] { run_simulate(sim_opts); });

  ImputeOptions imp_opts;
  CLI::App* imp = app.add_subcommand(
      "impute", "multiply impute missing covariates");
  add_data_options(imp, imp_opts.data);
  add_mi_options(imp, imp_opts.mi);
  imp->add_option("--tve", imp_opts.tve,
                  "per-covariate effect form, <name>=<form>");
  imp->add_option("--out-dir", imp_opts.out_dir, "output directory");
  imp->callback([&] { run_impute(imp_opts); });

  FitOptions fit_opts;
  CLI::App* fit = app.add_subcommand(
      "fit", "fit the hazard model (pooled over imputations when data are "
             "incomplete)");
  add_data_options(fit, fit_opts.data);
  add_mi_options(fit, fit_opts.mi);
  fit->add_option("--tve", fit_opts.tve,
                  "per-covariate effect form, <name>=<form>");
  fit->add_option("--out-dir", fit_opts.out_dir, "output directory");
  CLI::Option* fit_method = fit->get_option("--method");
  fit->callback([&] {
    fit_opts.have_method = fit_method->count() > 0;
    run_fit(fit_opts);
  });

  FitOptions ph_opts;
  CLI::App* ph = app.add_subcommand(
      "ph-test", "joint Wald tests of proportional hazards per covariate");
  add_data_options(ph, ph_opts.data);
  add_mi_options(ph, ph_opts.mi);
  ph->add_option("--tve", ph_opts.tve,
                 "per-covariate effect form under the alternative");
  ph->add_option("--alpha", ph_opts.alpha, "rejection threshold");
  ph->add_option("--wald", ph_opts.wald, "pooled test: chisq or d1");
  ph->add_option("--out-dir", ph_opts.out_dir, "output directory");
  CLI::Option* ph_method = ph->get_option("--method");
  ph->callback([&] {
    ph_opts.have_method = ph_method->count() > 0;
    run_ph_test(ph_opts);
  });

  SelectCmdOptions sel_opts;
  CLI::App* sel = app.add_subcommand(
      "select", "forward selection of time-varying effects over pooled fits");
  add_data_options(sel, sel_opts.data);
  add_mi_options(sel, sel_opts.mi);
  sel->add_option("--alpha", sel_opts.alpha, "selection threshold");
  sel->add_option("--wald", sel_opts.wald, "pooled test: chisq or d1");
  sel->add_flag("--knots-all-times", sel_opts.knots_all_times,
                "place candidate knots on all follow-up times");
  sel->add_option("--out-dir", sel_opts.out_dir, "output directory");
  sel->callback([&] { run_select(sel_opts); });

  ReplicateOptions rep_opts;
  CLI::App* rep = app.add_subcommand(
      "replicate", "run a Monte Carlo replication study from a JSON config");
  rep->add_option("--config", rep_opts.config_path, "study config JSON")
      ->required();
  rep->add_option("--out-dir", rep_opts.out_dir, "output directory");
  rep->callback([&] { run_replicate(rep_opts); });

  ReportOptions report_opts;
  CLI::App* report = app.add_subcommand(
      "report", "summarize a dataset: events, follow-up, missingness");
  add_data_options(report, report_opts.data);
  report->add_option("--out-dir", report_opts.out_dir, "output directory");
  report->callback([&] { run_report(report_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
