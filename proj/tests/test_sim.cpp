#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "tvemi/errors.hpp"
#include "tvemi/sim.hpp"
#include "tvemi/stats.hpp"

using namespace tvemi;

TEST_CASE("scenario effects match hand-evaluated values") {
  CHECK(scenario_tve(1, 0.0) == 0.5);
  CHECK(scenario_tve(1, 7.3) == 0.5);
  CHECK(kScenarioX2Effect == 0.5);

  CHECK(scenario_tve(2, 0.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(scenario_tve(2, 2.5) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(scenario_tve(2, 9.0) == doctest::Approx(1.9).epsilon(1e-12));

  CHECK(scenario_tve(3, 0.0) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(scenario_tve(3, 2.5) ==
        doctest::Approx(1.15310576346739).epsilon(1e-12));
  CHECK(scenario_tve(3, 9.0) ==
        doctest::Approx(1.6465456359454103).epsilon(1e-12));

  CHECK(scenario_tve(4, 0.0) == doctest::Approx(1.74).epsilon(1e-12));
  CHECK(scenario_tve(4, 1.0) ==
        doctest::Approx(0.82238880646344814).epsilon(1e-12));
  CHECK(scenario_tve(4, 2.5) ==
        doctest::Approx(0.39857780839931756).epsilon(1e-12));
  CHECK(scenario_tve(4, 9.0) ==
        doctest::Approx(0.22706450748688151).epsilon(1e-12));

  CHECK(scenario_tve(5, 0.0) ==
        doctest::Approx(1.4374353053136271).epsilon(1e-12));
  CHECK(scenario_tve(5, 1.0) ==
        doctest::Approx(0.58756878367312848).epsilon(1e-12));
  CHECK(scenario_tve(5, 2.5) ==
        doctest::Approx(0.12712497175038406).epsilon(1e-12));
  CHECK(scenario_tve(5, 9.0) ==
        doctest::Approx(0.36924198406343028).epsilon(1e-12));

  CHECK_THROWS_AS(scenario_tve(0, 1.0), ConfigError);
  CHECK_THROWS_AS(scenario_tve(6, 1.0), ConfigError);
  CHECK_THROWS_AS(scenario_tve(2, -0.1), ConfigError);
}

TEST_CASE("enum names round trip") {
  for (const char* s : {"binary", "continuous"})
    CHECK(to_string(parse_covariate_design(s)) == s);
  for (const char* s : {"none", "standard30", "outcome_dependent", "low10"})
    CHECK(to_string(parse_missingness(s)) == s);
  for (const char* s : {"complete_data", "complete_case", "mi_approx",
                        "mi_smc", "mi_tve_approx", "mi_tve_smc"})
    CHECK(to_string(parse_method(s)) == s);
  CHECK_THROWS_AS(parse_covariate_design("Binary"), ConfigError);
  CHECK_THROWS_AS(parse_missingness(""), ConfigError);
  CHECK_THROWS_AS(parse_method("mi"), ConfigError);
}

TEST_CASE("covariate generators hit the designed moments") {
  const Eigen::Index n = 200000;
  Rng rng(3);
  const Eigen::MatrixXd xb = generate_covariates(CovariateDesign::Binary, n, rng);
  CHECK(std::abs(xb.col(0).mean() - 0.2) < 0.005);
  Eigen::Index n1 = 0, n1_x2 = 0, n0 = 0, n0_x2 = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (xb(i, 0) == 1.0) {
      ++n1;
      n1_x2 += xb(i, 1) == 1.0;
    } else {
      ++n0;
      n0_x2 += xb(i, 1) == 1.0;
    }
  }
  CHECK(std::abs(static_cast<double>(n1_x2) / n1 - expit(1.0)) < 0.01);
  CHECK(std::abs(static_cast<double>(n0_x2) / n0 - 0.5) < 0.01);

  const Eigen::MatrixXd xc =
      generate_covariates(CovariateDesign::Continuous, n, rng);
  CHECK(std::abs(xc.col(0).mean()) < 0.01);
  CHECK(std::abs(xc.col(1).mean()) < 0.01);
  const Eigen::MatrixXd cov = sample_covariance(xc);
  CHECK(std::abs(cov(0, 0) - 1.0) < 0.02);
  CHECK(std::abs(cov(1, 1) - 1.0) < 0.02);
  CHECK(std::abs(cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1)) - 0.5) < 0.01);

  CHECK_THROWS_AS(generate_covariates(CovariateDesign::Binary, 0, rng),
                  ConfigError);

  const auto info = scenario_covariates(CovariateDesign::Binary);
  REQUIRE(info.size() == 2);
  CHECK(info[0].name == "x1");
  CHECK(info[1].kind == CovariateKind::Binary);
  CHECK(scenario_covariates(CovariateDesign::Continuous)[1].kind ==
        CovariateKind::Continuous);
}

TEST_CASE("event-time inversion agrees with closed forms") {
  Rng rng(2024);

  // scenario 1: cumulative hazard lambda e^{0.5 x2} e^{0.5 x1} t
  for (int trial = 0; trial < 10; ++trial) {
    const double x1 = trial % 2;
    const double x2 = 0.4 * (trial % 3) - 0.4;
    Rng probe = rng;  // same stream: predict the uniform the generator draws
    const double u = probe.uniform();
    const double t = generate_event_time(x1, x2, 1, 0.15, 30.0, rng);
    const double target = -std::log(u) / (0.15 * std::exp(0.5 * x2));
    const double expected = target / std::exp(0.5 * x1);
    if (expected <= 30.0)
      CHECK(t == doctest::Approx(expected).epsilon(1e-6));
    else
      CHECK(t == 31.0);
  }

  // scenario 2 with x1 = 1: C(t) = e^{0.1} (e^{0.2 t} - 1) / 0.2
  for (int trial = 0; trial < 10; ++trial) {
    const double x2 = 0.3 * (trial % 4) - 0.6;
    Rng probe = rng;
    const double u = probe.uniform();
    const double t = generate_event_time(1.0, x2, 2, 0.1, 20.0, rng);
    const double target = -std::log(u) / (0.1 * std::exp(0.5 * x2));
    const double expected = std::log1p(0.2 * target / std::exp(0.1)) / 0.2;
    if (expected <= 20.0)
      CHECK(t == doctest::Approx(expected).epsilon(1e-6));
    else
      CHECK(t == 21.0);
  }

  // a vanishing rate pushes every event past the horizon
  CHECK(generate_event_time(1.0, 0.0, 3, 1e-9, 10.0, rng) == 11.0);

  CHECK_THROWS_AS(generate_event_time(1.0, 0.0, 1, 0.0, 10.0, rng),
                  ConfigError);
  CHECK_THROWS_AS(generate_event_time(1.0, 0.0, 1, 0.1, 0.0, rng),
                  ConfigError);
}

TEST_CASE("generated times are uniform on the model's own scale") {
  // probability integral transform: F(T | x1, x2) must be uniform, using the
  // scenario-2 closed form per subject; censoring is negligible by design
  ScenarioConfig cfg;
  cfg.scenario = 2;
  cfg.design = CovariateDesign::Binary;
  cfg.n_subjects = 20000;
  cfg.lambda_event = 0.3;
  cfg.lambda_dropout = 0.0;
  cfg.admin_censor = 60.0;
  Rng rng(99);
  const SurvivalDataset ds = generate_dataset(cfg, rng);

  std::vector<double> u;
  u.reserve(ds.n());
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    if (ds.event[i] != 1) continue;
    const double c1 =
        ds.x(i, 0) == 1.0
            ? std::exp(0.1) * (std::exp(0.2 * ds.time[i]) - 1.0) / 0.2
            : ds.time[i];
    u.push_back(-std::expm1(-cfg.lambda_event *
                            std::exp(0.5 * ds.x(i, 1)) * c1));
  }
  REQUIRE(static_cast<Eigen::Index>(u.size()) >= ds.n() - 5);
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    ks = std::max(ks, std::abs(u[i] - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(u[i] - static_cast<double>(i + 1) / n));
  }
  CHECK(ks < 0.015);  // 1% critical value at this n is about 0.0115
}

TEST_CASE("dataset generation enforces censoring invariants deterministically") {
  ScenarioConfig cfg;
  cfg.scenario = 2;
  cfg.design = CovariateDesign::Binary;
  cfg.n_subjects = 400;
  cfg.lambda_event = 0.12;
  cfg.lambda_dropout = 0.05;
  cfg.admin_censor = 10.0;

  Rng r1(17);
  const SurvivalDataset a = generate_dataset(cfg, r1);
  Rng r2(17);
  const SurvivalDataset b = generate_dataset(cfg, r2);
  CHECK((a.time.array() == b.time.array()).all());
  CHECK((a.event.array() == b.event.array()).all());
  CHECK((a.x.array() == b.x.array()).all());

  int events = 0, dropouts = 0, admin = 0;
  for (Eigen::Index i = 0; i < a.n(); ++i) {
    CHECK(a.time[i] > 0.0);
    CHECK(a.time[i] <= cfg.admin_censor);
    if (a.event[i] == 1)
      ++events;
    else if (a.time[i] < cfg.admin_censor)
      ++dropouts;
    else
      ++admin;
  }
  CHECK(events > 0);
  CHECK(dropouts > 0);
  CHECK(admin > 0);

  // switching dropout off must not perturb the event stream
  ScenarioConfig no_drop = cfg;
  no_drop.lambda_dropout = 0.0;
  Rng r3(17);
  const SurvivalDataset c = generate_dataset(no_drop, r3);
  for (Eigen::Index i = 0; i < a.n(); ++i) {
    CHECK((c.event[i] == 0) == (c.time[i] == cfg.admin_censor));
    if (a.event[i] == 1) {
      CHECK(c.event[i] == 1);
      CHECK(c.time[i] == a.time[i]);
    }
  }

  ScenarioConfig bad = cfg;
  bad.lambda_event = 0.0;
  CHECK_THROWS_AS(generate_dataset(bad, r1), ConfigError);
  bad = cfg;
  bad.n_subjects = 0;
  CHECK_THROWS_AS(generate_dataset(bad, r1), ConfigError);
  bad = cfg;
  bad.admin_censor = 0.0;
  CHECK_THROWS_AS(generate_dataset(bad, r1), ConfigError);
}

namespace {

SurvivalDataset big_complete_dataset(Eigen::Index n, std::uint64_t seed) {
  ScenarioConfig cfg;
  cfg.scenario = 1;
  cfg.design = CovariateDesign::Binary;
  cfg.n_subjects = n;
  cfg.lambda_event = 0.12;
  cfg.lambda_dropout = 0.05;
  cfg.admin_censor = 10.0;
  Rng rng(seed);
  return generate_dataset(cfg, rng);
}

double missing_rate(const SurvivalDataset& ds, Eigen::Index col) {
  double miss = 0;
  for (Eigen::Index i = 0; i < ds.n(); ++i) miss += !ds.observed(i, col);
  return miss / static_cast<double>(ds.n());
}

}  // namespace

TEST_CASE("missingness mechanisms hit their marginal rates") {
  const SurvivalDataset full = big_complete_dataset(60000, 12);
  const double n = static_cast<double>(full.n());

  // expected x1 loss: one third exposed at expit(0.4 + 0.5 x2), one third
  // loses both covariates with probability 0.3
  double mean_expit = 0.0;
  for (Eigen::Index i = 0; i < full.n(); ++i)
    mean_expit += expit(0.4 + 0.5 * full.x(i, 1));
  mean_expit /= n;

  Rng rng(5);
  const SurvivalDataset masked =
      apply_missingness(full, Missingness::Standard30, rng);
  CHECK(std::abs(missing_rate(masked, 0) - (mean_expit + 0.3) / 3.0) < 0.01);

  double both = 0;
  for (Eigen::Index i = 0; i < masked.n(); ++i)
    both += !masked.observed(i, 0) && !masked.observed(i, 1);
  CHECK(std::abs(both / n - 0.3 / 3.0) < 0.01);

  const SurvivalDataset low =
      apply_missingness(full, Missingness::Low10, rng);
  double both_low = 0;
  for (Eigen::Index i = 0; i < low.n(); ++i)
    both_low += !low.observed(i, 0) && !low.observed(i, 1);
  CHECK(std::abs(both_low / n - 0.1 / 3.0) < 0.01);

  // outcome-dependent losses concentrate on subjects with events
  const SurvivalDataset od =
      apply_missingness(full, Missingness::OutcomeDependent, rng);
  double miss_event = 0, n_event = 0, miss_cens = 0, n_cens = 0;
  for (Eigen::Index i = 0; i < od.n(); ++i) {
    const bool miss = !od.observed(i, 0) || !od.observed(i, 1);
    if (od.event[i] == 1) {
      ++n_event;
      miss_event += miss;
    } else {
      ++n_cens;
      miss_cens += miss;
    }
  }
  CHECK(miss_event / n_event > miss_cens / n_cens + 0.05);

  // None is a pass-through even for already masked data
  const SurvivalDataset same = apply_missingness(masked, Missingness::None, rng);
  CHECK((same.observed == masked.observed).all());

  CHECK_THROWS_AS(apply_missingness(masked, Missingness::Standard30, rng),
                  DataError);
  const SurvivalDataset one_cov = subset_rows(full, {0, 1, 2, 3});
  SurvivalDataset narrow = one_cov;
  narrow.x = one_cov.x.leftCols(1);
  narrow.observed = one_cov.observed.leftCols(1);
  narrow.covariates = {one_cov.covariates[0]};
  CHECK_THROWS_AS(apply_missingness(narrow, Missingness::Standard30, rng),
                  DataError);
}

TEST_CASE("rate calibration hits its targets and is reproducible") {
  CalibrationTargets targets;
  targets.event_fraction = 0.10;
  targets.dropout_fraction = 0.50;
  const CalibrationResult cal = calibrate_rates(
      1, CovariateDesign::Binary, targets, 10.0, 9, 4000, 0.005);
  CHECK(cal.lambda_event > 0.0);
  CHECK(cal.lambda_dropout > 0.0);
  CHECK(std::abs(cal.achieved_event - 0.10) <= 0.005);
  CHECK(std::abs(cal.achieved_dropout - 0.50) <= 0.005);
  CHECK(cal.rounds >= 1);

  const CalibrationResult again = calibrate_rates(
      1, CovariateDesign::Binary, targets, 10.0, 9, 4000, 0.005);
  CHECK(cal.lambda_event == again.lambda_event);
  CHECK(cal.lambda_dropout == again.lambda_dropout);
  CHECK(cal.rounds == again.rounds);

  // independent draw at the calibrated rates lands near the targets
  ScenarioConfig cfg;
  cfg.scenario = 1;
  cfg.design = CovariateDesign::Binary;
  cfg.n_subjects = 20000;
  cfg.lambda_event = cal.lambda_event;
  cfg.lambda_dropout = cal.lambda_dropout;
  cfg.admin_censor = 10.0;
  Rng rng(777);
  const SurvivalDataset ds = generate_dataset(cfg, rng);
  double events = 0, dropouts = 0;
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    events += ds.event[i] == 1;
    dropouts += ds.event[i] == 0 && ds.time[i] < cfg.admin_censor;
  }
  CHECK(std::abs(events / 20000.0 - 0.10) < 0.02);
  CHECK(std::abs(dropouts / 20000.0 - 0.50) < 0.02);

  CalibrationTargets no_drop = targets;
  no_drop.dropout_fraction = 0.0;
  const CalibrationResult cal0 = calibrate_rates(
      1, CovariateDesign::Binary, no_drop, 10.0, 9, 2000, 0.005);
  CHECK(cal0.lambda_dropout == 0.0);

  CalibrationTargets bad;
  bad.event_fraction = 0.0;
  CHECK_THROWS_AS(
      calibrate_rates(1, CovariateDesign::Binary, bad, 10.0, 9, 2000, 0.005),
      ConfigError);
  bad.event_fraction = 1.0;
  CHECK_THROWS_AS(
      calibrate_rates(1, CovariateDesign::Binary, bad, 10.0, 9, 2000, 0.005),
      ConfigError);
  bad.event_fraction = 0.1;
  bad.dropout_fraction = 1.0;
  CHECK_THROWS_AS(
      calibrate_rates(1, CovariateDesign::Binary, bad, 10.0, 9, 2000, 0.005),
      ConfigError);
  CHECK_THROWS_AS(calibrate_rates(1, CovariateDesign::Binary, targets, 10.0, 9,
                                  50, 0.005),
                  ConfigError);
  CHECK_THROWS_AS(calibrate_rates(1, CovariateDesign::Binary, targets, 10.0, 9,
                                  2000, 0.0),
                  ConfigError);
}

namespace {

StudyConfig smoke_study() {
  StudyConfig cfg;
  cfg.scenario.scenario = 1;
  cfg.scenario.design = CovariateDesign::Binary;
  cfg.scenario.n_subjects = 150;
  cfg.scenario.lambda_event = 0.12;
  cfg.scenario.lambda_dropout = 0.05;
  cfg.scenario.admin_censor = 10.0;
  cfg.reps = 3;
  cfg.m_imputations = 2;
  cfg.methods = {Method::CompleteCase, Method::MiApprox};
  cfg.missingness = Missingness::Standard30;
  cfg.seed = 4242;
  cfg.fcs_iterations = 5;
  cfg.threads = 1;
  return cfg;
}

}  // namespace

TEST_CASE("replication study runs, reports and reproduces itself") {
  const StudyConfig cfg = smoke_study();
  const PerformanceReport rep = run_replication_study(cfg);

  REQUIRE(rep.methods.size() == 3);  // complete-data reference always first
  CHECK(rep.methods[0].method == Method::CompleteData);
  CHECK(rep.methods[1].method == Method::CompleteCase);
  CHECK(rep.methods[2].method == Method::MiApprox);
  CHECK(rep.reps == 3);
  REQUIRE(rep.grid.size() == 101);
  CHECK(rep.grid[0] == 0.0);
  CHECK(rep.grid[100] == 10.0);
  REQUIRE(rep.eval_times == std::vector<double>{1.0, 5.0, 9.0});
  CHECK((rep.true_curve.col(0).array() == 0.5).all());
  CHECK((rep.true_curve.col(1).array() == 0.5).all());
  CHECK(rep.true_at_eval(2, 0) == 0.5);
  for (const MethodReport& m : rep.methods) {
    CHECK(m.n_reps_used + m.n_reps_failed == 3);
    CHECK(static_cast<int>(m.failures.size()) <= m.n_reps_failed);
  }
  CHECK(rep.methods[0].n_reps_used == 3);

  const PerformanceReport again = run_replication_study(cfg);
  StudyConfig threaded = cfg;
  threaded.threads = 2;
  const PerformanceReport parallel = run_replication_study(threaded);
  for (std::size_t i = 0; i < rep.methods.size(); ++i) {
    for (const PerformanceReport* other : {&again, &parallel}) {
      const MethodReport& a = rep.methods[i];
      const MethodReport& b = other->methods[i];
      CHECK(a.n_reps_used == b.n_reps_used);
      if (a.n_reps_used == 0) continue;
      CHECK((a.mean_curve.array() == b.mean_curve.array()).all());
      CHECK((a.bias.array() == b.bias.array()).all());
      CHECK((a.coverage_pct.array() == b.coverage_pct.array()).all());
      CHECK((a.rejection_pct.array() == b.rejection_pct.array()).all());
    }
  }
}

TEST_CASE("replication study validates its configuration") {
  StudyConfig cfg = smoke_study();
  cfg.reps = 0;
  CHECK_THROWS_AS(run_replication_study(cfg), ConfigError);

  cfg = smoke_study();
  cfg.alpha = 1.0;
  CHECK_THROWS_AS(run_replication_study(cfg), ConfigError);

  cfg = smoke_study();
  cfg.methods = {Method::MiApprox, Method::MiApprox};
  CHECK_THROWS_AS(run_replication_study(cfg), ConfigError);

  cfg = smoke_study();
  cfg.methods = {Method::MiSmc};
  cfg.m_imputations = 1;
  CHECK_THROWS_AS(run_replication_study(cfg), ConfigError);

  cfg = smoke_study();
  cfg.fcs_iterations = 0;
  CHECK_THROWS_AS(run_replication_study(cfg), ConfigError);

  cfg = smoke_study();
  cfg.n_knots = 2;
  CHECK_THROWS_AS(run_replication_study(cfg), ConfigError);

  // an explicit complete-data entry is folded into the implied reference
  cfg = smoke_study();
  cfg.reps = 1;
  cfg.methods = {Method::CompleteData, Method::CompleteCase};
  const PerformanceReport rep = run_replication_study(cfg);
  CHECK(rep.methods.size() == 2);
}
