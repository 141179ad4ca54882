#include "tvemi/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <thread>
#include <utility>

#include "tvemi/cox_tve.hpp"
#include "tvemi/errors.hpp"
#include "tvemi/mi_approx.hpp"
#include "tvemi/mi_smc.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

std::string to_string(CovariateDesign v) {
  return v == CovariateDesign::Binary ? "binary" : "continuous";
}

std::string to_string(Missingness v) {
  switch (v) {
    case Missingness::None: return "none";
    case Missingness::Standard30: return "standard30";
    case Missingness::OutcomeDependent: return "outcome_dependent";
    case Missingness::Low10: return "low10";
  }
  return "none";
}

std::string to_string(Method v) {
  switch (v) {
    case Method::CompleteData: return "complete_data";
    case Method::CompleteCase: return "complete_case";
    case Method::MiApprox: return "mi_approx";
    case Method::MiSmc: return "mi_smc";
    case Method::MiTveApprox: return "mi_tve_approx";
    case Method::MiTveSmc: return "mi_tve_smc";
  }
  return "complete_data";
}

CovariateDesign parse_covariate_design(const std::string& s) {
  if (s == "binary") return CovariateDesign::Binary;
  if (s == "continuous") return CovariateDesign::Continuous;
  throw ConfigError("unknown covariate design '" + s + "'");
}

Missingness parse_missingness(const std::string& s) {
  if (s == "none") return Missingness::None;
  if (s == "standard30") return Missingness::Standard30;
  if (s == "outcome_dependent") return Missingness::OutcomeDependent;
  if (s == "low10") return Missingness::Low10;
  throw ConfigError("unknown missingness mechanism '" + s + "'");
}

Method parse_method(const std::string& s) {
  if (s == "complete_data") return Method::CompleteData;
  if (s == "complete_case") return Method::CompleteCase;
  if (s == "mi_approx") return Method::MiApprox;
  if (s == "mi_smc") return Method::MiSmc;
  if (s == "mi_tve_approx") return Method::MiTveApprox;
  if (s == "mi_tve_smc") return Method::MiTveSmc;
  throw ConfigError("unknown method '" + s + "'");
}

double scenario_tve(int scenario, double t) {
  if (!(t >= 0.0)) throw ConfigError("scenario effect requires t >= 0");
  switch (scenario) {
    case 1:
      return 0.5;
    case 2:
      return 0.1 + 0.2 * t;
    case 3:
      return 0.1 + 0.8 * std::pow(t, 0.3);
    case 4:
      return 0.32 + 1.42 * std::exp(-t) - 0.02 * std::pow(t, 0.7);
    case 5:
      return 4.0 / (1.0 + std::exp(1.2 * (t + 0.5))) +
             4.0 / (3.0 * (1.1 + std::exp(10.0 - t))) + 0.02;
    default:
      throw ConfigError("unknown scenario id " + std::to_string(scenario));
  }
}

Eigen::MatrixXd generate_covariates(CovariateDesign design, Eigen::Index n,
                                    Rng& rng) {
  if (n < 1) throw ConfigError("covariate generation requires n >= 1");
  Eigen::MatrixXd x(n, 2);
  if (design == CovariateDesign::Binary) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = rng.bernoulli(0.2) ? 1.0 : 0.0;
      x(i, 1) = rng.bernoulli(expit(x(i, 0))) ? 1.0 : 0.0;
    }
  } else {
    // correlation 0.5: x2 = 0.5 z1 + sqrt(0.75) z2
    const double load = std::sqrt(0.75);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      x(i, 0) = z1;
      x(i, 1) = 0.5 * z1 + load * z2;
    }
  }
  return x;
}

std::vector<CovariateInfo> scenario_covariates(CovariateDesign design) {
  const CovariateKind kind = design == CovariateDesign::Binary
                                 ? CovariateKind::Binary
                                 : CovariateKind::Continuous;
  return {{"x1", kind}, {"x2", kind}};
}

namespace {

constexpr double kMaxPanelWidth = 0.01;
constexpr double kQuadTol = 1e-8;

// Cumulative integral C(t) = int_0^t exp(f(u) x1) du on [0, horizon] by
// composite Simpson. `vals` holds the integrand at spacing h/2 so halving the
// panels reuses every existing evaluation.
struct Profile {
  int scenario = 1;
  double x1 = 0.0;
  double horizon = 0.0;
  double h = 0.0;
  std::vector<double> vals;
  std::vector<double> cum;

  double g(double t) const { return std::exp(scenario_tve(scenario, t) * x1); }

  void fill(int n_panels) {
    h = horizon / n_panels;
    const std::size_t n_pts = 2 * static_cast<std::size_t>(n_panels) + 1;
    std::vector<double> next(n_pts);
    const bool reuse = vals.size() * 2 - 1 == n_pts;
    for (std::size_t j = 0; j < n_pts; ++j)
      next[j] = (reuse && j % 2 == 0) ? vals[j / 2] : g(0.5 * h * static_cast<double>(j));
    vals = std::move(next);
    cum.assign(static_cast<std::size_t>(n_panels) + 1, 0.0);
    for (int j = 0; j < n_panels; ++j)
      cum[j + 1] = cum[j] + h / 6.0 * (vals[2 * j] + 4.0 * vals[2 * j + 1] +
                                       vals[2 * j + 2]);
  }

  double total() const { return cum.back(); }

  double value_at(double t) const {
    if (!(t > 0.0)) return 0.0;
    if (t >= horizon) return total();
    const auto j = std::min<std::size_t>(static_cast<std::size_t>(t / h),
                                         cum.size() - 2);
    return partial(j, t);
  }

  // cum[panel] + Simpson over [panel*h, t]
  double partial(std::size_t panel, double t) const {
    const double a = static_cast<double>(panel) * h;
    const double m = 0.5 * (a + t);
    return cum[panel] +
           (t - a) / 6.0 * (vals[2 * panel] + 4.0 * g(m) + g(t));
  }

  // smallest t with C(t) >= target; horizon + 1 when the target is beyond
  // C(horizon). Bracketed secant/bisection hybrid inside the located panel.
  double invert(double target) const {
    if (!(target > 0.0)) return 0.0;
    if (target > total()) return horizon + 1.0;
    const auto it = std::lower_bound(cum.begin(), cum.end(), target);
    const auto j = static_cast<std::size_t>(it - cum.begin());  // cum[j] >= target, j >= 1
    double lo = static_cast<double>(j - 1) * h;
    double hi = std::min(static_cast<double>(j) * h, horizon);
    double flo = cum[j - 1] - target;
    double fhi = cum[j] - target;
    for (int iter = 0; iter < 80 && hi - lo > 1e-13; ++iter) {
      double cand = 0.5 * (lo + hi);
      if (iter % 2 == 0 && fhi > flo) {
        const double secant = lo - flo * (hi - lo) / (fhi - flo);
        if (secant > lo && secant < hi) cand = secant;
      }
      const double fc = partial(j - 1, cand) - target;
      if (fc >= 0.0) {
        hi = cand;
        fhi = fc;
      } else {
        lo = cand;
        flo = fc;
      }
    }
    return 0.5 * (lo + hi);
  }
};

Profile make_profile(int scenario, double x1, double horizon) {
  Profile prof;
  prof.scenario = scenario;
  prof.x1 = x1;
  prof.horizon = horizon;
  int n_panels = std::max<int>(
      1, static_cast<int>(std::ceil(horizon / kMaxPanelWidth)));
  prof.fill(n_panels);
  for (int level = 0; level < 8; ++level) {
    const double before = prof.total();
    n_panels *= 2;
    prof.fill(n_panels);
    if (std::abs(prof.total() - before) < kQuadTol) break;
  }
  return prof;
}

// Profiles keyed by x1. Binary designs hit the cache; continuous designs
// rebuild into scratch once it is full.
class ProfileSource {
 public:
  ProfileSource(int scenario, double horizon)
      : scenario_(scenario), horizon_(horizon) {}

  const Profile& get(double x1) {
    const auto it = cache_.find(x1);
    if (it != cache_.end()) return it->second;
    if (cache_.size() < 4)
      return cache_.emplace(x1, make_profile(scenario_, x1, horizon_))
          .first->second;
    scratch_ = make_profile(scenario_, x1, horizon_);
    return scratch_;
  }

 private:
  int scenario_;
  double horizon_;
  std::map<double, Profile> cache_;
  Profile scratch_;
};

}  // namespace

double generate_event_time(double x1, double x2, int scenario,
                           double lambda_event, double horizon, Rng& rng) {
  if (!(lambda_event > 0.0))
    throw ConfigError("event-time generation requires lambda_event > 0");
  if (!(horizon > 0.0))
    throw ConfigError("event-time generation requires horizon > 0");
  const Profile prof = make_profile(scenario, x1, horizon);
  const double u = rng.uniform();
  const double target =
      -std::log(u) / (lambda_event * std::exp(kScenarioX2Effect * x2));
  return prof.invert(target);
}

SurvivalDataset generate_dataset(const ScenarioConfig& config, Rng& rng) {
  if (config.n_subjects < 1)
    throw ConfigError("dataset generation requires n_subjects >= 1");
  if (!(config.lambda_event > 0.0))
    throw ConfigError("lambda_event must be positive");
  if (!(config.lambda_dropout >= 0.0) || !std::isfinite(config.lambda_dropout))
    throw ConfigError("lambda_dropout must be nonnegative");
  if (!(config.admin_censor > 0.0))
    throw ConfigError("admin_censor must be positive");

  const Eigen::Index n = config.n_subjects;
  Eigen::MatrixXd x = generate_covariates(config.design, n, rng);
  ProfileSource profiles(config.scenario, config.admin_censor);

  Eigen::VectorXd te(n), tc(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    const double target =
        -std::log(u) /
        (config.lambda_event * std::exp(kScenarioX2Effect * x(i, 1)));
    te[i] = profiles.get(x(i, 0)).invert(target);
  }
  // one dropout uniform per subject regardless of the rate, so the event
  // stream is unchanged when dropout is switched off
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    tc[i] = config.lambda_dropout > 0.0
                ? -std::log(u) / config.lambda_dropout
                : std::numeric_limits<double>::infinity();
  }

  Eigen::VectorXd time(n);
  Eigen::VectorXi event(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double cens = std::min(tc[i], config.admin_censor);
    if (te[i] <= cens) {
      time[i] = te[i];
      event[i] = 1;
    } else {
      time[i] = cens;
      event[i] = 0;
    }
  }
  return make_complete_dataset(std::move(time), std::move(event), std::move(x),
                               scenario_covariates(config.design));
}

SurvivalDataset apply_missingness(const SurvivalDataset& ds, Missingness mech,
                                  Rng& rng) {
  if (mech == Missingness::None) return ds;
  if (ds.p() != 2)
    throw DataError("missingness mechanisms require exactly two covariates");
  const Eigen::Index n = ds.n();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!ds.row_complete(i))
      throw DataError("missingness mechanisms expect a fully observed dataset");

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(order);
  const Eigen::Index g0 = (n + 2) / 3;
  const Eigen::Index g1 = (n + 1) / 3;
  std::vector<int> group(n);
  for (Eigen::Index j = 0; j < n; ++j)
    group[order[j]] = j < g0 ? 0 : (j < g0 + g1 ? 1 : 2);

  MaskMatrix observed = ds.observed;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x1 = ds.x(i, 0);
    const double x2 = ds.x(i, 1);
    const double d = ds.event[i];
    double p = 0.0;
    switch (mech) {
      case Missingness::Standard30:
        p = group[i] == 0   ? expit(0.4 + 0.5 * x2)
            : group[i] == 1 ? expit(0.4 + 0.5 * x1)
                            : 0.3;
        break;
      case Missingness::OutcomeDependent:
        p = group[i] == 0   ? expit(-0.4 + 0.5 * x2 + 0.5 * d + 0.5 * x2 * d)
            : group[i] == 1 ? expit(-0.4 + 0.5 * x1 + 0.5 * d + 0.5 * x1 * d)
                            : expit(-0.4 + 0.5 * d);
        break;
      case Missingness::Low10:
        p = group[i] == 0   ? expit(-1.2 + 0.5 * x2)
            : group[i] == 1 ? expit(-1.2 + 0.5 * x1)
                            : 0.1;
        break;
      case Missingness::None:
        break;
    }
    if (rng.bernoulli(p)) {
      if (group[i] != 1) observed(i, 0) = false;  // group 3 loses both
      if (group[i] != 0) observed(i, 1) = false;
    }
  }
  return make_dataset(ds.ids, ds.time, ds.event, ds.x, std::move(observed),
                      ds.covariates);
}

CalibrationResult calibrate_rates(int scenario, CovariateDesign design,
                                  const CalibrationTargets& targets,
                                  double admin_censor, std::uint64_t seed,
                                  Eigen::Index pilot_n, double tolerance) {
  if (!(targets.event_fraction > 0.0) || !(targets.event_fraction < 1.0))
    throw ConfigError("event fraction target must lie strictly in (0, 1)");
  if (!(targets.dropout_fraction >= 0.0) || !(targets.dropout_fraction < 1.0))
    throw ConfigError("dropout fraction target must lie in [0, 1)");
  if (!(admin_censor > 0.0)) throw ConfigError("admin_censor must be positive");
  if (pilot_n < 100) throw ConfigError("calibration pilot needs n >= 100");
  if (!(tolerance > 0.0)) throw ConfigError("calibration tolerance must be positive");

  Rng rng(seed);
  const Eigen::MatrixXd x = generate_covariates(design, pilot_n, rng);
  // common random numbers: subject i's event happens iff
  // lambda_E >= ke_i / C_i(c_i) with c_i = min(kd_i / lambda_C, admin)
  std::vector<double> ke(pilot_n), kd(pilot_n);
  for (Eigen::Index i = 0; i < pilot_n; ++i)
    ke[i] = -std::log(rng.uniform()) / std::exp(kScenarioX2Effect * x(i, 1));
  for (Eigen::Index i = 0; i < pilot_n; ++i)
    kd[i] = -std::log(rng.uniform());

  ProfileSource profiles(scenario, admin_censor);
  const double inf = std::numeric_limits<double>::infinity();

  const auto compute_r = [&](double lambda_c) {
    std::vector<double> r(pilot_n);
    for (Eigen::Index i = 0; i < pilot_n; ++i) {
      const double c = lambda_c > 0.0 ? std::min(kd[i] / lambda_c, admin_censor)
                                      : admin_censor;
      const double ci = profiles.get(x(i, 0)).value_at(c);
      r[i] = ci > 0.0 ? ke[i] / ci : inf;
    }
    return r;
  };
  // dropout happens iff lambda_C > kd_i / min(T_E_i, admin)
  const auto compute_s = [&](double lambda_e) {
    std::vector<double> s(pilot_n);
    for (Eigen::Index i = 0; i < pilot_n; ++i) {
      const double t_e = profiles.get(x(i, 0)).invert(ke[i] / lambda_e);
      s[i] = kd[i] / std::min(t_e, admin_censor);
    }
    return s;
  };
  const auto frac_reached = [&](const std::vector<double>& v, double lam,
                                bool strict) {
    Eigen::Index c = 0;
    for (const double t : v) c += strict ? (lam > t) : (lam >= t);
    return static_cast<double>(c) / static_cast<double>(v.size());
  };
  const auto bisect = [&](const std::vector<double>& v, double target,
                          bool strict) {
    double hi = 1.0;
    int guard = 0;
    while (frac_reached(v, hi, strict) < target) {
      hi *= 2.0;
      if (++guard > 60)
        throw NumericError("rate calibration target unreachable");
    }
    double lo = 0.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (frac_reached(v, mid, strict) >= target)
        hi = mid;
      else
        lo = mid;
    }
    return hi;
  };

  CalibrationResult result;
  result.lambda_event = -std::log1p(-targets.event_fraction) / admin_censor;
  result.lambda_dropout =
      targets.dropout_fraction > 0.0
          ? -std::log1p(-targets.dropout_fraction) / admin_censor
          : 0.0;
  std::vector<double> r = compute_r(result.lambda_dropout);
  bool converged = false;
  for (int round = 1; round <= 25; ++round) {
    result.rounds = round;
    result.lambda_event = bisect(r, targets.event_fraction, false);
    std::vector<double> s;
    if (targets.dropout_fraction > 0.0) {
      s = compute_s(result.lambda_event);
      result.lambda_dropout = bisect(s, targets.dropout_fraction, true);
    } else {
      result.lambda_dropout = 0.0;
    }
    r = compute_r(result.lambda_dropout);
    result.achieved_event = frac_reached(r, result.lambda_event, false);
    result.achieved_dropout =
        targets.dropout_fraction > 0.0
            ? frac_reached(s, result.lambda_dropout, true)
            : 0.0;
    if (std::abs(result.achieved_event - targets.event_fraction) <= tolerance &&
        std::abs(result.achieved_dropout - targets.dropout_fraction) <=
            tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw NumericError("rate calibration did not converge within 25 rounds");
  return result;
}

namespace {

struct MethodOutcome {
  bool ok = false;
  std::string error;
  Eigen::MatrixXd curve;      // grid x covariate
  Eigen::MatrixXd est_eval;   // eval times x covariate
  Eigen::MatrixXd half_eval;  // half-width of the 95% band
  Eigen::VectorXd ph_p;       // per covariate
};

struct RepOutcome {
  bool data_ok = false;
  std::string data_error;
  std::vector<MethodOutcome> methods;  // aligned with the study method list
};

std::uint64_t method_seed(std::uint64_t base_seed, int rep, Method m) {
  const std::uint64_t rep_base =
      splitmix64(base_seed ^ static_cast<std::uint64_t>(rep));
  return splitmix64(rep_base + static_cast<std::uint64_t>(m) + 1);
}

MethodOutcome analyze_single(const SurvivalDataset& ds,
                             const std::vector<TveSpec>& specs,
                             const Eigen::VectorXd& grid,
                             const Eigen::VectorXd& eval_times) {
  const CoxTveModel fit = fit_cox_tve(ds, specs);
  const auto p = static_cast<Eigen::Index>(specs.size());
  MethodOutcome out;
  out.curve.resize(grid.size(), p);
  out.est_eval.resize(eval_times.size(), p);
  out.half_eval.resize(eval_times.size(), p);
  out.ph_p.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    out.curve.col(k) = tve_curve(fit, static_cast<int>(k), grid).estimate;
    const TveCurve at = tve_curve(fit, static_cast<int>(k), eval_times);
    out.est_eval.col(k) = at.estimate;
    out.half_eval.col(k) = 0.5 * (at.upper95 - at.lower95);
    out.ph_p[k] = ph_wald_test(fit, static_cast<int>(k)).p_value;
  }
  return out;
}

MethodOutcome analyze_pooled(const ImputedDatasets& imputed,
                             const std::vector<TveSpec>& specs,
                             const Eigen::VectorXd& grid,
                             const Eigen::VectorXd& eval_times,
                             WaldMode wald_mode) {
  const PooledFit fit = pooled_cox_tve(imputed, specs);
  const auto p = static_cast<Eigen::Index>(specs.size());
  MethodOutcome out;
  out.curve.resize(grid.size(), p);
  out.est_eval.resize(eval_times.size(), p);
  out.half_eval.resize(eval_times.size(), p);
  out.ph_p.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    out.curve.col(k) = pooled_tve_curve(fit, static_cast<int>(k), grid).estimate;
    const TveCurve at = pooled_tve_curve(fit, static_cast<int>(k), eval_times);
    out.est_eval.col(k) = at.estimate;
    out.half_eval.col(k) = 0.5 * (at.upper95 - at.lower95);
    out.ph_p[k] = pooled_ph_test(fit, static_cast<int>(k), wald_mode).p_value;
  }
  return out;
}

RepOutcome run_rep(const StudyConfig& config, int rep,
                   const std::vector<Method>& methods,
                   const Eigen::VectorXd& grid,
                   const Eigen::VectorXd& eval_times) {
  RepOutcome out;
  out.methods.resize(methods.size());
  Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(rep));

  SurvivalDataset full;
  std::vector<TveSpec> specs;
  try {
    full = generate_dataset(config.scenario, rng);
    const std::vector<double> knots =
        select_knots(observed_event_times(full), config.n_knots);
    specs.assign(2, TveSpec::rcs(knots));
    out.methods[0] = analyze_single(full, specs, grid, eval_times);
    out.methods[0].ok = true;
  } catch (const std::exception& e) {
    out.data_error = e.what();
    return out;
  }
  out.data_ok = true;

  SurvivalDataset masked;
  try {
    masked = apply_missingness(full, config.missingness, rng);
  } catch (const std::exception& e) {
    out.data_ok = false;
    out.data_error = e.what();
    return out;
  }

  const std::vector<TveSpec> constant_specs(2, TveSpec::constant());
  for (std::size_t idx = 1; idx < methods.size(); ++idx) {
    MethodOutcome& mo = out.methods[idx];
    const Method m = methods[idx];
    try {
      if (m == Method::CompleteCase) {
        mo = analyze_single(subset_rows(masked, complete_rows(masked)), specs,
                            grid, eval_times);
      } else {
        MiConfig mic;
        mic.m = config.m_imputations;
        mic.fcs_iterations = config.fcs_iterations;
        mic.rejection_cap = config.rejection_cap;
        mic.include_h1 = config.include_h1;
        mic.include_interactions = config.include_interactions;
        mic.seed = method_seed(config.seed, rep, m);
        const bool tve = m == Method::MiTveApprox || m == Method::MiTveSmc;
        const std::vector<TveSpec>& ispecs = tve ? specs : constant_specs;
        const ImputedDatasets imputed =
            (m == Method::MiApprox || m == Method::MiTveApprox)
                ? impute_approx(masked, ispecs, mic)
                : impute_smc(masked, ispecs, mic);
        mo = analyze_pooled(imputed, specs, grid, eval_times, config.wald_mode);
      }
      mo.ok = true;
    } catch (const std::exception& e) {
      mo.ok = false;
      mo.error = e.what();
    }
  }
  return out;
}

int resolve_threads(int requested, int jobs) {
  long t = requested > 0
               ? requested
               : static_cast<long>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  if (const char* env = std::getenv("TVEMI_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) t = std::min(t, cap);
  }
  return static_cast<int>(std::max(1L, std::min(t, static_cast<long>(jobs))));
}

void parallel_for(int jobs, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

double binomial_mcse_pct(double pct, Eigen::Index n) {
  if (n < 1) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(pct * (100.0 - pct) / static_cast<double>(n));
}

}  // namespace

PerformanceReport run_replication_study(const StudyConfig& config) {
  if (config.reps < 1) throw ConfigError("replication study needs reps >= 1");
  if (!(config.alpha > 0.0) || !(config.alpha < 1.0))
    throw ConfigError("alpha must lie strictly in (0, 1)");
  if (config.fcs_iterations < 1)
    throw ConfigError("fcs_iterations must be at least 1");
  if (config.n_knots < 3)
    throw ConfigError("the spline analysis model needs at least 3 knots");

  std::vector<Method> methods{Method::CompleteData};
  for (const Method m : config.methods) {
    if (m == Method::CompleteData) continue;  // always implied
    if (std::find(methods.begin(), methods.end(), m) != methods.end())
      throw ConfigError("duplicate method '" + to_string(m) + "'");
    methods.push_back(m);
  }
  const bool any_mi =
      std::any_of(methods.begin(), methods.end(), [](Method m) {
        return m != Method::CompleteData && m != Method::CompleteCase;
      });
  if (any_mi && config.m_imputations < 2)
    throw ConfigError("pooling needs at least 2 imputations");

  const Eigen::Index p = 2;
  const Eigen::VectorXd grid =
      Eigen::VectorXd::LinSpaced(101, 0.0, config.scenario.admin_censor);
  const std::vector<double> eval_times{1.0, 5.0, 9.0};
  Eigen::VectorXd evalv(3);
  evalv << 1.0, 5.0, 9.0;

  PerformanceReport report;
  report.grid = grid;
  report.eval_times = eval_times;
  report.reps = config.reps;
  report.lambda_event = config.scenario.lambda_event;
  report.lambda_dropout = config.scenario.lambda_dropout;
  report.true_curve.resize(grid.size(), p);
  report.true_at_eval.resize(evalv.size(), p);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    report.true_curve(i, 0) = scenario_tve(config.scenario.scenario, grid[i]);
    report.true_curve(i, 1) = kScenarioX2Effect;
  }
  for (Eigen::Index e = 0; e < evalv.size(); ++e) {
    report.true_at_eval(e, 0) =
        scenario_tve(config.scenario.scenario, evalv[e]);
    report.true_at_eval(e, 1) = kScenarioX2Effect;
  }

  std::vector<RepOutcome> outcomes(config.reps);
  const int threads = resolve_threads(config.threads, config.reps);
  parallel_for(config.reps, threads, [&](int r) {
    try {
      outcomes[r] = run_rep(config, r + 1, methods, grid, evalv);
    } catch (...) {
      outcomes[r] = RepOutcome{};
      outcomes[r].data_error = "unexpected failure";
      outcomes[r].methods.resize(methods.size());
    }
  });

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t idx = 0; idx < methods.size(); ++idx) {
    MethodReport mr;
    mr.method = methods[idx];
    std::vector<int> used;
    for (int r = 0; r < config.reps; ++r) {
      const RepOutcome& o = outcomes[r];
      if (o.data_ok && o.methods[idx].ok)
        used.push_back(r);
      else if (mr.failures.size() < 10)
        mr.failures.push_back("rep " + std::to_string(r + 1) + ": " +
                              (o.data_ok ? o.methods[idx].error : o.data_error));
    }
    const auto n_used = static_cast<Eigen::Index>(used.size());
    mr.n_reps_used = static_cast<int>(n_used);
    mr.n_reps_failed = config.reps - mr.n_reps_used;

    mr.mean_curve = Eigen::MatrixXd::Constant(grid.size(), p, nan);
    mr.curve_q025 = mr.mean_curve;
    mr.curve_q50 = mr.mean_curve;
    mr.curve_q975 = mr.mean_curve;
    mr.bias = Eigen::MatrixXd::Constant(evalv.size(), p, nan);
    mr.bias_mcse = mr.bias;
    mr.coverage_pct = mr.bias;
    mr.coverage_mcse = mr.bias;
    mr.rejection_pct = Eigen::VectorXd::Constant(p, nan);
    mr.rejection_mcse = mr.rejection_pct;

    if (n_used > 0) {
      std::vector<double> column(used.size());
      for (Eigen::Index k = 0; k < p; ++k) {
        for (Eigen::Index i = 0; i < grid.size(); ++i) {
          for (Eigen::Index j = 0; j < n_used; ++j)
            column[j] = outcomes[used[j]].methods[idx].curve(i, k);
          const double mean =
              std::accumulate(column.begin(), column.end(), 0.0) /
              static_cast<double>(n_used);
          std::sort(column.begin(), column.end());
          mr.mean_curve(i, k) = mean;
          mr.curve_q025(i, k) = quantile_type7(column, 0.025);
          mr.curve_q50(i, k) = quantile_type7(column, 0.5);
          mr.curve_q975(i, k) = quantile_type7(column, 0.975);
        }

        Eigen::Index rejected = 0;
        for (Eigen::Index j = 0; j < n_used; ++j)
          rejected += outcomes[used[j]].methods[idx].ph_p[k] < config.alpha;
        const double pct =
            100.0 * static_cast<double>(rejected) / static_cast<double>(n_used);
        mr.rejection_pct[k] = pct;
        mr.rejection_mcse[k] = binomial_mcse_pct(pct, n_used);

        for (Eigen::Index e = 0; e < evalv.size(); ++e) {
          const double truth = report.true_at_eval(e, k);
          Eigen::Index covered = 0;
          double sum = 0.0, sum_sq = 0.0;
          for (Eigen::Index j = 0; j < n_used; ++j) {
            const MethodOutcome& mo = outcomes[used[j]].methods[idx];
            covered += std::abs(mo.est_eval(e, k) - truth) <= mo.half_eval(e, k);
            // bias of the complete-data reference is against the truth; the
            // other methods are measured against the complete-data estimate
            const double delta =
                idx == 0 ? mo.est_eval(e, k) - truth
                         : mo.est_eval(e, k) -
                               outcomes[used[j]].methods[0].est_eval(e, k);
            sum += delta;
            sum_sq += delta * delta;
          }
          const double nd = static_cast<double>(n_used);
          const double mean = sum / nd;
          mr.bias(e, k) = mean;
          mr.bias_mcse(e, k) =
              n_used > 1
                  ? std::sqrt(std::max(0.0, (sum_sq - nd * mean * mean) /
                                                (nd - 1.0)) /
                              nd)
                  : nan;
          const double cov_pct = 100.0 * static_cast<double>(covered) / nd;
          mr.coverage_pct(e, k) = cov_pct;
          mr.coverage_mcse(e, k) = binomial_mcse_pct(cov_pct, n_used);
        }
      }
    }
    report.methods.push_back(std::move(mr));
  }
  return report;
}

}  // namespace tvemi
