#include "tvemi/mi_smc.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tvemi/errors.hpp"
#include "tvemi/glm.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// index of the baseline jump at or before `time`; -1 if none
Eigen::Index jump_at_or_before(const BaselineHazard& h0, double time) {
  const double* begin = h0.times.data();
  const double* end = begin + h0.times.size();
  return static_cast<Eigen::Index>(std::upper_bound(begin, end, time) - begin) -
         1;
}

}  // namespace

double acceptance_probability(double time, int event,
                              const std::vector<TveSpec>& specs,
                              const Eigen::VectorXd& beta, int target,
                              double candidate,
                              const Eigen::RowVectorXd& covariate_row,
                              const BaselineHazard& h0,
                              bool* used_earlier_jump, double* raw) {
  const int p = static_cast<int>(specs.size());
  if (covariate_row.size() != p)
    throw ConfigError("acceptance: covariate row length mismatch");
  std::vector<int> offsets(p);
  int total = 0;
  for (int k = 0; k < p; ++k) {
    offsets[k] = total;
    total += specs[k].dimension();
  }
  if (beta.size() != total)
    throw ConfigError("acceptance: coefficient length mismatch");
  if (used_earlier_jump) *used_earlier_jump = false;

  auto lp_at = [&](double t) {
    double lp = 0.0;
    for (int k = 0; k < p; ++k) {
      const double xk = k == target ? candidate : covariate_row[k];
      lp += tve_eval(specs[k],
                     beta.segment(offsets[k], specs[k].dimension()), t) *
            xk;
    }
    return lp;
  };

  double survival_sum = 0.0;
  for (Eigen::Index j = 0;
       j < h0.times.size() && h0.times[j] <= time; ++j)
    survival_sum += h0.increments[j] * std::exp(lp_at(h0.times[j]));

  double value;
  if (event == 0) {
    value = std::exp(-survival_sum);
    if (raw) *raw = value;
  } else {
    const Eigen::Index idx = jump_at_or_before(h0, time);
    if (idx < 0) {
      if (used_earlier_jump) *used_earlier_jump = true;
      if (raw) *raw = 0.0;
      return 0.0;
    }
    if (h0.times[idx] != time && used_earlier_jump) *used_earlier_jump = true;
    const double exponent = 1.0 + lp_at(time) - survival_sum;
    if (std::isnan(exponent))
      throw NumericError("acceptance probability: non-finite exponent");
    const double r = h0.increments[idx] * std::exp(exponent);
    if (raw) *raw = r;
    value = clamp01(r);
  }
  if (std::isnan(value))
    throw NumericError("acceptance probability: non-finite result");
  return value;
}

Eigen::VectorXd draw_substantive_params(const CoxTveModel& model, Rng& rng) {
  return mvn_draw(model.coefficients, model.covariance, rng);
}

ImputedDatasets impute_smc(const SurvivalDataset& ds,
                           const std::vector<TveSpec>& specs,
                           const MiConfig& config) {
  if (config.m < 1) throw ConfigError("m must be at least 1");
  if (config.fcs_iterations < 1) throw ConfigError("fcs_iterations must be >= 1");
  if (config.rejection_cap < 1) throw ConfigError("rejection_cap must be >= 1");
  if (static_cast<Eigen::Index>(specs.size()) != ds.p())
    throw ConfigError("one tve spec per covariate required");

  const Eigen::Index n = ds.n();
  const int p = static_cast<int>(ds.p());
  std::vector<int> offsets(p);
  int total_dim = 0;
  for (int k = 0; k < p; ++k) {
    offsets[k] = total_dim;
    total_dim += specs[k].dimension();
  }

  std::vector<int> targets;
  std::vector<std::vector<Eigen::Index>> missing_rows(p);
  for (int k = 0; k < p; ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (!ds.observed(i, k)) missing_rows[k].push_back(i);
    if (!missing_rows[k].empty()) targets.push_back(k);
  }

  ImputedDatasets out;
  out.base = ds;
  out.diagnostics.fcs_iterations = config.fcs_iterations;
  out.diagnostics.proposals_per_subject.assign(n, 0);
  for (int k : targets)
    out.diagnostics.total_cells += static_cast<long>(missing_rows[k].size());
  std::set<std::string> warn;
  if (targets.empty())
    warn.insert("no missing cells: imputations are identical copies");

  // the jump times of every per-iteration baseline are the distinct event
  // times of ds, so per-subject jump prefixes and basis caches are fixed
  const RiskSetCounts counts = risk_set_counts(ds);
  const Eigen::Index n_jumps = counts.times.size();
  std::vector<Eigen::Index> jump_end(n);  // jumps with t_j <= T_i
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* begin = counts.times.data();
    jump_end[i] =
        std::upper_bound(begin, begin + n_jumps, ds.time[i]) - begin;
  }
  std::vector<Eigen::MatrixXd> basis_jumps(p), basis_follow(p);
  {
    Eigen::VectorXd b;
    for (int k = 0; k < p; ++k) {
      const int d = specs[k].dimension();
      b.resize(d);
      basis_jumps[k].resize(n_jumps, d);
      for (Eigen::Index j = 0; j < n_jumps; ++j) {
        basis_into(specs[k], counts.times[j], b);
        basis_jumps[k].row(j) = b.transpose();
      }
      basis_follow[k].resize(n, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        basis_into(specs[k], ds.time[i], b);
        basis_follow[k].row(i) = b.transpose();
      }
    }
  }

  const Eigen::MatrixXd x0 = initial_completed_values(ds);

  Eigen::MatrixXd jump_effects(n_jumps, p);  // f_k(t_j) at the current draw
  Eigen::MatrixXd follow_effects(n, p);      // f_k(T_i) at the current draw
  std::vector<double> w_buf, b_buf;

  for (int m_idx = 1; m_idx <= config.m; ++m_idx) {
    Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(m_idx));
    out.stream_seeds.push_back(config.seed ^ static_cast<std::uint64_t>(m_idx));
    Eigen::MatrixXd x = x0;
    CoxFitOptions fit_opts;

    for (int it = 0; it < config.fcs_iterations; ++it) {
      CoxTveModel model = fit_cox_tve(ds, specs, x, fit_opts);
      fit_opts.start = model.coefficients;  // warm start the next refit
      const Eigen::VectorXd beta = draw_substantive_params(model, rng);
      CoxTveModel at_draw = model;
      at_draw.coefficients = beta;
      const BaselineHazard h0 = breslow_baseline(ds, at_draw, x);
      if (h0.times.size() != n_jumps)
        throw NumericError("baseline jump times changed unexpectedly");

      if (targets.empty()) continue;
      for (int k = 0; k < p; ++k) {
        const auto seg = beta.segment(offsets[k], specs[k].dimension());
        jump_effects.col(k) = basis_jumps[k] * seg;
        follow_effects.col(k) = basis_follow[k] * seg;
      }

      for (int k : targets) {
        // conditional covariate model on the current completed data
        Eigen::MatrixXd Xc(n, p);
        Xc.col(0).setOnes();
        Eigen::Index c = 1;
        for (int l = 0; l < p; ++l)
          if (l != k) Xc.col(c++) = x.col(l);
        const Eigen::VectorXd yk = x.col(k);

        Eigen::VectorXd gamma;
        double prop_sd = 0.0;
        const bool binary = ds.covariates[k].kind == CovariateKind::Binary;
        if (binary) {
          gamma = posterior_draw_logistic(logistic_fit(Xc, yk), rng);
        } else {
          const LinearDraw draw = posterior_draw_linear(ols_fit(Xc, yk), rng);
          gamma = draw.coef;
          prop_sd = std::sqrt(draw.sigma2);
        }

        for (Eigen::Index i : missing_rows[k]) {
          const Eigen::Index j_end = jump_end[i];
          const auto row = x.row(i);
          // proposal mean on the covariate-model design (1, x_others)
          double prop_eta = gamma[0];
          {
            Eigen::Index c2 = 1;
            for (int l = 0; l < p; ++l)
              if (l != k) prop_eta += gamma[c2++] * x(i, l);
          }

          const int event = ds.event[i];
          double lp_other_T = 0.0, effect_T = 0.0, dh_T = 0.0;
          if (event == 1) {
            lp_other_T = follow_effects.row(i).dot(row) -
                         follow_effects(i, k) * row[k];
            effect_T = follow_effects(i, k);
            if (j_end < 1) {
              warn.insert("event before first baseline jump: acceptance 0");
              dh_T = 0.0;
            } else {
              dh_T = h0.increments[j_end - 1];
              if (h0.times[j_end - 1] != ds.time[i])
                warn.insert(
                    "event time off the baseline grid: used nearest earlier "
                    "increment");
            }
          }

          auto count_event_eval = [&](double raw) {
            if (event == 1) {
              ++out.diagnostics.event_acceptance_evaluations;
              if (raw > 1.0) ++out.diagnostics.event_acceptance_clamped;
            }
            if (std::isnan(raw))
              throw NumericError("acceptance probability: non-finite exponent");
          };

          double value = x(i, k);
          bool accepted = false;
          if (binary) {
            // only two candidate values: precompute both acceptance probs
            double s0 = 0.0, s1 = 0.0;
            for (Eigen::Index j = 0; j < j_end; ++j) {
              const double a = jump_effects.row(j).dot(row) -
                               jump_effects(j, k) * row[k];
              const double e0 = h0.increments[j] * std::exp(a);
              s0 += e0;
              s1 += e0 * std::exp(jump_effects(j, k));
            }
            double raw0, raw1;
            if (event == 1) {
              raw0 = dh_T * std::exp(1.0 + lp_other_T - s0);
              raw1 = dh_T * std::exp(1.0 + lp_other_T + effect_T - s1);
            } else {
              raw0 = std::exp(-s0);
              raw1 = std::exp(-s1);
            }
            const double prob1 = expit(prop_eta);
            for (int trial = 0; trial < config.rejection_cap; ++trial) {
              const bool one = rng.bernoulli(prob1);
              value = one ? 1.0 : 0.0;
              ++out.diagnostics.total_proposals;
              ++out.diagnostics.proposals_per_subject[i];
              const double raw = one ? raw1 : raw0;
              count_event_eval(raw);
              if (rng.uniform() <= clamp01(raw)) {
                accepted = true;
                break;
              }
            }
          } else {
            w_buf.resize(j_end);
            b_buf.resize(j_end);
            for (Eigen::Index j = 0; j < j_end; ++j) {
              const double a = jump_effects.row(j).dot(row) -
                               jump_effects(j, k) * row[k];
              w_buf[j] = h0.increments[j] * std::exp(a);
              b_buf[j] = jump_effects(j, k);
            }
            for (int trial = 0; trial < config.rejection_cap; ++trial) {
              value = prop_eta + prop_sd * rng.normal();
              ++out.diagnostics.total_proposals;
              ++out.diagnostics.proposals_per_subject[i];
              double s = 0.0;
              for (Eigen::Index j = 0; j < j_end; ++j)
                s += w_buf[j] * std::exp(b_buf[j] * value);
              const double raw =
                  event == 1
                      ? dh_T * std::exp(1.0 + lp_other_T + effect_T * value - s)
                      : std::exp(-s);
              count_event_eval(raw);
              if (rng.uniform() <= clamp01(raw)) {
                accepted = true;
                break;
              }
            }
          }
          if (!accepted) {
            ++out.diagnostics.rejection_cap_hits;
            warn.insert("rejection cap reached: kept the last proposal");
          }
          x(i, k) = value;
        }
      }
    }
    out.completed.push_back(x);
  }
  out.diagnostics.warnings.assign(warn.begin(), warn.end());
  return out;
}

}  // namespace tvemi
