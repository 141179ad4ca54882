#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tvemi/survival.hpp"
#include "tvemi/tve.hpp"

namespace tvemi {

// Hazard model h(t|x) = h0(t) * exp( sum_k f_k(t) x_k ) with each f_k(t)
// expanded on its spec's basis. Coefficients are stacked per-covariate blocks
// in covariate order; `covariance` is the inverse observed information from
// the Breslow partial likelihood.
struct CoxTveModel {
  std::vector<std::string> covariate_names;
  std::vector<TveSpec> specs;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;
  double log_partial_likelihood = 0.0;
  int n_subjects = 0;
  int n_events = 0;
  int newton_iterations = 0;
  double max_abs_score = 0.0;
  double max_time = 0.0;  // largest follow-up time in the fitted data
  double t99 = 0.0;       // 99th percentile of follow-up, default curve limit

  int n_covariates() const { return static_cast<int>(specs.size()); }
  int block_offset(int k) const;
  int block_dim(int k) const { return specs[k].dimension(); }
  Eigen::VectorXd block_coefficients(int k) const;
  Eigen::MatrixXd block_covariance(int k) const;
  // f_k(t) at the current coefficients
  double effect_at(int k, double t) const;
};

struct CoxFitOptions {
  int max_iterations = 100;
  int max_step_halvings = 20;
  double score_tol = 1e-8;
  double loglik_tol = 1e-10;
  double divergence_bound = 50.0;
  double rcond_min = 1e-12;
  std::optional<Eigen::VectorXd> start;  // defaults to the zero vector
};

// Newton-Raphson maximum partial likelihood with Breslow tie handling.
// `completed` supplies covariate values for every cell (rows align with ds).
CoxTveModel fit_cox_tve(const SurvivalDataset& ds,
                        const std::vector<TveSpec>& specs,
                        const Eigen::MatrixXd& completed,
                        const CoxFitOptions& options = {});

// Fully observed data only; errors if any cell is missing.
CoxTveModel fit_cox_tve(const SurvivalDataset& ds,
                        const std::vector<TveSpec>& specs,
                        const CoxFitOptions& options = {});

// Breslow partial log-likelihood and its analytic score at an arbitrary
// coefficient vector (exposed for gradient checks).
double cox_tve_loglik(const SurvivalDataset& ds,
                      const std::vector<TveSpec>& specs,
                      const Eigen::MatrixXd& completed,
                      const Eigen::VectorXd& beta);
Eigen::VectorXd cox_tve_score(const SurvivalDataset& ds,
                              const std::vector<TveSpec>& specs,
                              const Eigen::MatrixXd& completed,
                              const Eigen::VectorXd& beta);

// Baseline increments dH0(t_j) = d_j / sum_{i in R_j} exp(lp_i(t_j)) at the
// distinct event times. Reduces to Nelson-Aalen when all coefficients are 0.
BaselineHazard breslow_baseline(const SurvivalDataset& ds,
                                const CoxTveModel& model,
                                const Eigen::MatrixXd& completed);
BaselineHazard breslow_baseline(const SurvivalDataset& ds,
                                const CoxTveModel& model);

// Pointwise estimate of f_k(t) with 95% Wald bands.
struct TveCurve {
  Eigen::VectorXd times;
  Eigen::VectorXd estimate;
  Eigen::VectorXd lower95;
  Eigen::VectorXd upper95;
  std::vector<bool> extrapolated;  // t outside [0, max_time]
};

TveCurve tve_curve(const TveSpec& spec, const Eigen::VectorXd& block_coefs,
                   const Eigen::MatrixXd& block_cov,
                   const Eigen::VectorXd& times, double max_time);
// Default grid: 100 equally spaced points on [0, t99].
TveCurve tve_curve(const CoxTveModel& model, int covariate,
                   const Eigen::VectorXd& times);
TveCurve tve_curve(const CoxTveModel& model, int covariate);

struct WaldTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// Joint Wald test of the coefficients at `indices` against zero.
WaldTest wald_block_test(const Eigen::VectorXd& coefs,
                         const Eigen::MatrixXd& cov,
                         const std::vector<int>& indices);

// Proportional-hazards test for one covariate: all block coefficients except
// the leading one jointly zero (df = dimension - 1). Requires a non-Constant
// spec.
WaldTest ph_wald_test(const CoxTveModel& model, int covariate);

}  // namespace tvemi
