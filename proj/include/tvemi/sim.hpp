#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tvemi/pool.hpp"
#include "tvemi/random.hpp"
#include "tvemi/survival.hpp"

namespace tvemi {

enum class CovariateDesign { Binary, Continuous };
enum class Missingness { None, Standard30, OutcomeDependent, Low10 };
enum class Method {
  CompleteData,
  CompleteCase,
  MiApprox,
  MiSmc,
  MiTveApprox,
  MiTveSmc,
};

std::string to_string(CovariateDesign v);
std::string to_string(Missingness v);
std::string to_string(Method v);
CovariateDesign parse_covariate_design(const std::string& s);
Missingness parse_missingness(const std::string& s);
Method parse_method(const std::string& s);

// True time-varying log hazard ratio of x1 under each scenario (1..5); x2's
// true effect is the constant 0.5 in every scenario.
double scenario_tve(int scenario, double t);
constexpr double kScenarioX2Effect = 0.5;

// Two covariates: binary x1 ~ Bern(0.2) with x2 | x1 ~ Bern(expit(x1)), or
// standard bivariate normal with correlation 0.5.
Eigen::MatrixXd generate_covariates(CovariateDesign design, Eigen::Index n,
                                    Rng& rng);
std::vector<CovariateInfo> scenario_covariates(CovariateDesign design);

// Inverse-transform event time for hazard
// lambda_event * exp(scenario_tve(t) x1 + 0.5 x2), integrated by composite
// Simpson (panel width <= 0.01, halved until the cumulative changes by less
// than 1e-8) with bracketed root finding. Returns horizon + 1 when the event
// falls beyond the horizon.
double generate_event_time(double x1, double x2, int scenario,
                           double lambda_event, double horizon, Rng& rng);

struct ScenarioConfig {
  int scenario = 1;
  CovariateDesign design = CovariateDesign::Binary;
  Eigen::Index n_subjects = 2000;
  double lambda_event = 0.0;
  double lambda_dropout = 0.0;
  double admin_censor = 10.0;
};

// Covariates, event times, exponential dropout, administrative censoring at
// admin_censor; event indicator is 1 iff the event time is the minimum.
SurvivalDataset generate_dataset(const ScenarioConfig& config, Rng& rng);

// Masks covariate cells on a copy. Subjects are split into three random
// groups: group 1 can lose x1 (probability depending on x2 and, for the
// outcome-dependent mechanism, the outcome), group 2 symmetrically loses x2,
// group 3 loses both with one coin.
SurvivalDataset apply_missingness(const SurvivalDataset& ds, Missingness mech,
                                  Rng& rng);

struct CalibrationTargets {
  double event_fraction = 0.10;
  double dropout_fraction = 0.50;
};

struct CalibrationResult {
  double lambda_event = 0.0;
  double lambda_dropout = 0.0;
  double achieved_event = 0.0;    // pilot fractions at the returned rates
  double achieved_dropout = 0.0;
  int rounds = 0;
};

// Alternating bisection on lambda_event then lambda_dropout against one
// pilot draw (common random numbers), until both observed fractions are
// within `tolerance` of target. Deterministic given seed.
CalibrationResult calibrate_rates(int scenario, CovariateDesign design,
                                  const CalibrationTargets& targets,
                                  double admin_censor, std::uint64_t seed,
                                  Eigen::Index pilot_n = 20000,
                                  double tolerance = 0.005);

struct StudyConfig {
  ScenarioConfig scenario;
  int reps = 200;
  int m_imputations = 5;
  std::vector<Method> methods;  // complete-data always runs and comes first
  Missingness missingness = Missingness::Standard30;
  std::uint64_t seed = 1;
  int fcs_iterations = 10;
  int rejection_cap = 1000;
  double alpha = 0.05;
  WaldMode wald_mode = WaldMode::ChiSquare;
  bool include_h1 = false;
  bool include_interactions = false;
  int n_knots = 5;
  int threads = 0;  // 0 = hardware concurrency; env TVEMI_THREADS caps both
};

struct MethodReport {
  Method method = Method::CompleteData;
  int n_reps_used = 0;
  int n_reps_failed = 0;
  Eigen::MatrixXd mean_curve;  // grid x covariate
  Eigen::MatrixXd curve_q025, curve_q50, curve_q975;
  // rows: eval times, cols: covariates
  Eigen::MatrixXd bias, bias_mcse;
  Eigen::MatrixXd coverage_pct, coverage_mcse;
  Eigen::VectorXd rejection_pct, rejection_mcse;
  std::vector<std::string> failures;  // truncated sample of messages
};

struct PerformanceReport {
  Eigen::VectorXd grid;
  std::vector<double> eval_times;
  Eigen::MatrixXd true_curve;    // grid x covariate
  Eigen::MatrixXd true_at_eval;  // eval times x covariate
  std::vector<MethodReport> methods;
  double lambda_event = 0.0, lambda_dropout = 0.0;
  int reps = 0;
};

// Monte Carlo replication study. Each rep draws a dataset, fits the
// complete-data reference (5-knot spline effects for both covariates, knots
// from that rep's observed event times), applies missingness, and runs the
// configured methods on the masked data. Curve bias for complete-case and MI
// methods is measured against the complete-data mean; coverage and rejection
// are against the truth. Per-rep failures are excluded and counted. The
// whole study is a pure function of (config, seed).
PerformanceReport run_replication_study(const StudyConfig& config);

}  // namespace tvemi
