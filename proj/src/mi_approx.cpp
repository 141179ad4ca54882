#include "tvemi/mi_approx.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tvemi/errors.hpp"
#include "tvemi/glm.hpp"
#include "tvemi/random.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

namespace {

std::vector<int> incomplete_covariates(const SurvivalDataset& ds) {
  std::vector<int> out;
  for (Eigen::Index k = 0; k < ds.p(); ++k)
    if (!ds.observed.col(k).all()) out.push_back(static_cast<int>(k));
  return out;
}

std::vector<std::string> basis_slot_names(const TveSpec& spec) {
  switch (spec.form()) {
    case TveSpec::Form::Constant: return {"1"};
    case TveSpec::Form::Linear: return {"1", "t"};
    case TveSpec::Form::Rcs: {
      std::vector<std::string> names = {"1", "t"};
      for (int i = 0; i + 2 < spec.dimension(); ++i)
        names.push_back("s" + std::to_string(i + 1));
      return names;
    }
    case TveSpec::Form::Step: {
      std::vector<std::string> names;
      for (int i = 0; i < spec.dimension(); ++i)
        names.push_back("i" + std::to_string(i + 1));
      return names;
    }
  }
  return {};
}

}  // namespace

Eigen::MatrixXd initial_completed_values(const SurvivalDataset& ds) {
  Eigen::MatrixXd x = ds.x;
  for (Eigen::Index k = 0; k < ds.p(); ++k) {
    double sum = 0.0;
    long n_obs = 0, n_ones = 0;
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      if (!ds.observed(i, k)) continue;
      ++n_obs;
      sum += ds.x(i, k);
      if (ds.x(i, k) == 1.0) ++n_ones;
    }
    if (n_obs == 0)
      throw DataError("covariate " + ds.covariates[k].name +
                      " has no observed values");
    double fill = sum / static_cast<double>(n_obs);
    if (ds.covariates[k].kind == CovariateKind::Binary)
      fill = 2 * n_ones > n_obs ? 1.0 : 0.0;
    for (Eigen::Index i = 0; i < ds.n(); ++i)
      if (!ds.observed(i, k)) x(i, k) = fill;
  }
  return x;
}

SurvivalDataset ImputedDatasets::dataset(int j) const {
  SurvivalDataset out = base;
  out.x = completed.at(j);
  out.observed.setConstant(true);
  return out;
}

ImputationDesign build_imputation_design(const SurvivalDataset& ds, int target,
                                         const std::vector<TveSpec>& specs,
                                         const Eigen::MatrixXd& current,
                                         const NelsonAalenEstimate& na,
                                         const MiConfig& config) {
  if (target < 0 || target >= ds.p()) throw ConfigError("bad target index");
  if (static_cast<Eigen::Index>(specs.size()) != ds.p())
    throw ConfigError("one tve spec per covariate required");
  const Eigen::Index n = ds.n();
  const TveSpec& spec = specs[target];
  const bool step = spec.form() == TveSpec::Form::Step;

  std::vector<int> others;
  for (Eigen::Index k = 0; k < ds.p(); ++k)
    if (k != target) others.push_back(static_cast<int>(k));

  ImputationDesign out;
  out.column_names.push_back("(intercept)");
  for (int k : others) out.column_names.push_back(ds.covariates[k].name);
  const auto slots = basis_slot_names(spec);
  for (const auto& s : slots) out.column_names.push_back("d:" + s);

  std::vector<std::string> hazard_names;
  if (!step) {
    hazard_names.push_back("cumhaz");
    if (config.include_h1) hazard_names.push_back("cumhaz1");
  } else {
    for (std::size_t k = 0; k < spec.knots().size(); ++k)
      hazard_names.push_back("cumhaz:p" + std::to_string(k + 1));
    hazard_names.push_back("cumhaz:tail");
  }
  for (const auto& h : hazard_names) out.column_names.push_back(h);
  if (config.include_interactions)
    for (int k : others)
      for (const auto& h : hazard_names)
        out.column_names.push_back(ds.covariates[k].name + ":" + h);

  const Eigen::Index n_cols =
      static_cast<Eigen::Index>(out.column_names.size());
  out.X.resize(n, n_cols);

  Eigen::VectorXd b(spec.dimension());
  Eigen::VectorXd hz(hazard_names.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    out.X(i, c++) = 1.0;
    for (int k : others) out.X(i, c++) = current(i, k);
    basis_into(spec, ds.time[i], b);
    const double d = static_cast<double>(ds.event[i]);
    for (int s = 0; s < spec.dimension(); ++s) out.X(i, c++) = d * b[s];

    if (!step) {
      hz[0] = na.h.value_at(ds.time[i]);
      if (config.include_h1) hz[1] = na.h1.value_at(ds.time[i]);
    } else {
      // per-period hazard mass for fully elapsed periods, then partial tail
      const auto& cuts = spec.knots();
      double lower = 0.0;
      std::size_t k = 0;
      for (; k < cuts.size() && cuts[k] <= ds.time[i]; ++k) {
        hz[k] = na.h.increment_sum(lower, cuts[k]);
        lower = cuts[k];
      }
      for (std::size_t z = k; z < cuts.size(); ++z) hz[z] = 0.0;
      hz[cuts.size()] = na.h.increment_sum(lower, ds.time[i]);
    }
    for (Eigen::Index h = 0; h < hz.size(); ++h) out.X(i, c++) = hz[h];
    if (config.include_interactions)
      for (int k : others)
        for (Eigen::Index h = 0; h < hz.size(); ++h)
          out.X(i, c++) = current(i, k) * hz[h];
  }
  return out;
}

ImputedDatasets impute_approx(const SurvivalDataset& ds,
                              const std::vector<TveSpec>& specs,
                              const MiConfig& config) {
  if (config.m < 1) throw ConfigError("m must be at least 1");
  if (config.fcs_iterations < 1) throw ConfigError("fcs_iterations must be >= 1");
  if (static_cast<Eigen::Index>(specs.size()) != ds.p())
    throw ConfigError("one tve spec per covariate required");

  ImputedDatasets out;
  out.base = ds;
  out.diagnostics.fcs_iterations = config.fcs_iterations;
  const std::vector<int> targets = incomplete_covariates(ds);
  const Eigen::MatrixXd x0 = initial_completed_values(ds);
  const NelsonAalenEstimate na = nelson_aalen(ds);
  std::set<std::string> warn;

  for (int k : targets)
    out.diagnostics.total_cells +=
        static_cast<long>(ds.n()) - ds.observed.col(k).count();
  if (targets.empty())
    warn.insert("no missing cells: imputations are identical copies");

  for (int m_idx = 1; m_idx <= config.m; ++m_idx) {
    const std::uint64_t stream = config.seed ^ static_cast<std::uint64_t>(m_idx);
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(m_idx));
    Eigen::MatrixXd x = x0;

    for (int it = 0; it < config.fcs_iterations && !targets.empty(); ++it) {
      for (int k : targets) {
        const ImputationDesign design =
            build_imputation_design(ds, k, specs, x, na, config);
        std::vector<Eigen::Index> obs, mis;
        for (Eigen::Index i = 0; i < ds.n(); ++i)
          (ds.observed(i, k) ? obs : mis).push_back(i);

        Eigen::MatrixXd Xo(obs.size(), design.X.cols());
        Eigen::VectorXd yo(obs.size());
        for (std::size_t r = 0; r < obs.size(); ++r) {
          Xo.row(r) = design.X.row(obs[r]);
          yo[r] = ds.x(obs[r], k);
        }

        if (ds.covariates[k].kind == CovariateKind::Binary) {
          const GlmFit fit = logistic_fit(Xo, yo, &design.column_names);
          for (int dcol : fit.dropped)
            warn.insert("imputation model for " + ds.covariates[k].name +
                        ": dropped collinear column " +
                        design.column_names[dcol]);
          const Eigen::VectorXd gamma = posterior_draw_logistic(fit, rng);
          for (Eigen::Index i : mis)
            x(i, k) = rng.bernoulli(expit(design.X.row(i).dot(gamma))) ? 1.0
                                                                       : 0.0;
        } else {
          if (Xo.rows() < Xo.cols() + 2)
            throw DataError("imputation model for " + ds.covariates[k].name +
                            ": fewer observed rows than columns + 2");
          const GlmFit fit = ols_fit(Xo, yo);
          for (int dcol : fit.dropped)
            warn.insert("imputation model for " + ds.covariates[k].name +
                        ": dropped collinear column " +
                        design.column_names[dcol]);
          const LinearDraw draw = posterior_draw_linear(fit, rng);
          const double sd = std::sqrt(draw.sigma2);
          for (Eigen::Index i : mis)
            x(i, k) = design.X.row(i).dot(draw.coef) + sd * rng.normal();
        }
      }
    }
    out.completed.push_back(std::move(x));
    out.stream_seeds.push_back(stream);
  }
  out.diagnostics.warnings.assign(warn.begin(), warn.end());
  return out;
}

}  // namespace tvemi
