#include "tvemi/pool.hpp"

#include <algorithm>
#include <cmath>

#include "tvemi/errors.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const char* context) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 0.0 || lmin / lmax < 1e-14)
    throw SingularError(std::string(context) + ": singular covariance block");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covariances) {
  const int m = static_cast<int>(estimates.size());
  if (m < 2) throw ConfigError("pooling needs at least 2 imputations");
  if (covariances.size() != estimates.size())
    throw ConfigError("pooling: estimate/covariance count mismatch");
  const Eigen::Index d = estimates[0].size();
  for (int j = 0; j < m; ++j)
    if (estimates[j].size() != d || covariances[j].rows() != d ||
        covariances[j].cols() != d)
      throw ConfigError("pooling: inconsistent dimensions across imputations");

  PooledEstimate out;
  out.m = m;
  out.q_bar = Eigen::VectorXd::Zero(d);
  out.within = Eigen::MatrixXd::Zero(d, d);
  for (int j = 0; j < m; ++j) {
    out.q_bar += estimates[j];
    out.within += covariances[j];
  }
  out.q_bar /= m;
  out.within /= m;

  Eigen::MatrixXd rows(m, d);
  for (int j = 0; j < m; ++j) rows.row(j) = estimates[j].transpose();
  out.between = sample_covariance(rows);
  out.total = out.within + (1.0 + 1.0 / m) * out.between;
  return out;
}

PooledWaldTest pooled_wald(const PooledEstimate& pooled,
                           const std::vector<int>& indices, WaldMode mode) {
  const int k = static_cast<int>(indices.size());
  if (k == 0) throw ConfigError("pooled wald: empty index set");
  Eigen::VectorXd theta(k);
  Eigen::MatrixXd t_sub(k, k), w_sub(k, k), b_sub(k, k);
  for (int a = 0; a < k; ++a) {
    theta[a] = pooled.q_bar[indices[a]];
    for (int b = 0; b < k; ++b) {
      t_sub(a, b) = pooled.total(indices[a], indices[b]);
      w_sub(a, b) = pooled.within(indices[a], indices[b]);
      b_sub(a, b) = pooled.between(indices[a], indices[b]);
    }
  }

  PooledWaldTest out;
  out.mode = mode;
  out.df1 = k;
  if (mode == WaldMode::ChiSquare) {
    out.statistic = theta.dot(spd_inverse(t_sub, "pooled wald") * theta);
    out.p_value = chisq_sf(out.statistic, k);
    return out;
  }

  // D1 small-sample statistic (Li, Raghunathan & Rubin)
  const Eigen::MatrixXd w_inv = spd_inverse(w_sub, "pooled wald");
  const double m = pooled.m;
  double r = (1.0 + 1.0 / m) * (b_sub * w_inv).trace() / k;
  if (r < 0.0) r = 0.0;
  out.statistic = theta.dot(w_inv * theta) / (k * (1.0 + r));
  const double t = static_cast<double>(k) * (m - 1.0);
  double df2;
  if (r <= 1e-12) {
    df2 = 1e9;  // no between-imputation variance: F(k, inf) = chi2_k / k
  } else if (t > 4.0) {
    const double u = 1.0 + (1.0 - 2.0 / t) / r;
    df2 = 4.0 + (t - 4.0) * u * u;
  } else {
    const double u = 1.0 + 1.0 / r;
    df2 = 0.5 * t * (1.0 + 1.0 / k) * u * u;
  }
  out.df2 = df2;
  out.p_value = fisher_f_sf(out.statistic, out.df1, df2);
  return out;
}

PooledFit pooled_cox_tve(const ImputedDatasets& imputed,
                         const std::vector<TveSpec>& specs,
                         const CoxFitOptions& options) {
  if (imputed.m() < 2) throw ConfigError("pooling needs at least 2 imputations");
  std::vector<Eigen::VectorXd> estimates;
  std::vector<Eigen::MatrixXd> covariances;
  PooledFit out;
  for (int j = 0; j < imputed.m(); ++j) {
    const CoxTveModel model =
        fit_cox_tve(imputed.base, specs, imputed.completed[j], options);
    estimates.push_back(model.coefficients);
    covariances.push_back(model.covariance);
    if (j == 0) {
      out.covariate_names = model.covariate_names;
      out.max_time = model.max_time;
      out.t99 = model.t99;
    }
  }
  out.specs = specs;
  out.pooled = rubin_pool(estimates, covariances);
  return out;
}

namespace {

int block_offset(const std::vector<TveSpec>& specs, int k) {
  int off = 0;
  for (int j = 0; j < k; ++j) off += specs[j].dimension();
  return off;
}

}  // namespace

PooledWaldTest pooled_ph_test(const PooledFit& fit, int covariate,
                              WaldMode mode) {
  if (fit.specs[covariate].form() == TveSpec::Form::Constant)
    throw ConfigError("ph test needs a non-constant tve spec");
  const int off = block_offset(fit.specs, covariate);
  std::vector<int> indices;
  for (int i = 1; i < fit.specs[covariate].dimension(); ++i)
    indices.push_back(off + i);
  return pooled_wald(fit.pooled, indices, mode);
}

TveCurve pooled_tve_curve(const PooledFit& fit, int covariate,
                          const Eigen::VectorXd& times) {
  const int off = block_offset(fit.specs, covariate);
  const int d = fit.specs[covariate].dimension();
  return tve_curve(fit.specs[covariate], fit.pooled.q_bar.segment(off, d),
                   fit.pooled.total.block(off, off, d, d), times,
                   fit.max_time);
}

SelectionResult mi_mtve_select(const ImputedDatasets& imputed,
                               const SelectOptions& options) {
  if (imputed.m() < 2) throw ConfigError("selection needs at least 2 imputations");
  const SurvivalDataset& ds = imputed.base;
  const int p = static_cast<int>(ds.p());

  // candidate forms, fixed knots from the original data's event times
  std::vector<double> knot_pool;
  if (options.knots_from_all_times)
    knot_pool.assign(ds.time.data(), ds.time.data() + ds.n());
  else
    knot_pool = observed_event_times(ds);
  std::vector<TveSpec> forms = {TveSpec::linear()};
  for (int L : options.rcs_sizes)
    forms.push_back(TveSpec::rcs(select_knots(knot_pool, L)));

  SelectionResult out;
  out.alpha = options.alpha;
  for (const auto& c : ds.covariates) out.covariate_names.push_back(c.name);
  std::vector<TveSpec> working(p, TveSpec::constant());
  std::vector<bool> granted(p, false);

  for (;;) {
    struct Candidate {
      int covariate;
      const TveSpec* spec;
      double p_value;
    };
    std::vector<Candidate> scored;
    int n_failed = 0, n_tried = 0;

    for (int c = 0; c < p; ++c) {
      if (granted[c]) continue;
      for (const TveSpec& form : forms) {
        ++n_tried;
        std::vector<TveSpec> candidate = working;
        candidate[c] = form;
        SelectionStep step;
        step.covariate = c;
        step.spec = form;
        try {
          const PooledFit fit = pooled_cox_tve(imputed, candidate);
          step.p_value = pooled_ph_test(fit, c, options.wald_mode).p_value;
        } catch (const Error& err) {
          step.p_value = 1.0;  // unusable candidate
          step.note = err.what();
          ++n_failed;
        }
        scored.push_back({c, &form, step.p_value});
        out.trace.push_back(std::move(step));
      }
    }
    if (n_tried == 0) break;  // every covariate already has a TVE
    if (n_failed == n_tried)
      throw NumericError(
          "selection aborted: every candidate fit failed in this round");

    const auto best = std::min_element(
        scored.begin(), scored.end(), [](const Candidate& a, const Candidate& b) {
          if (a.p_value != b.p_value) return a.p_value < b.p_value;
          if (a.spec->dimension() != b.spec->dimension())
            return a.spec->dimension() < b.spec->dimension();
          return a.covariate < b.covariate;
        });
    if (best == scored.end() || !(best->p_value < options.alpha)) break;

    working[best->covariate] = *best->spec;
    granted[best->covariate] = true;
    // mark the adopted candidate in the trace (last round's entries)
    for (auto it = out.trace.rbegin(); it != out.trace.rend(); ++it) {
      if (it->covariate == best->covariate && it->spec == *best->spec) {
        it->accepted = true;
        break;
      }
    }
  }

  out.final_specs = working;
  out.final_fit = pooled_cox_tve(imputed, working);
  return out;
}

}  // namespace tvemi
