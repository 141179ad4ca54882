#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tvemi/cox_tve.hpp"
#include "tvemi/mi_approx.hpp"
#include "tvemi/random.hpp"

namespace tvemi {

// Conditional model for one incomplete covariate given the others:
// intercept + all other covariates; logistic for binary targets, Gaussian
// for continuous ones.
struct CovariateModel {
  int target = 0;
  CovariateKind kind = CovariateKind::Continuous;
};

// Probability of accepting candidate value x* for `target`, given the
// subject's outcome (time, event), the other covariates, substantive
// coefficients `beta`, and baseline increments h0. With
// S = sum_{t_j <= time} dH0(t_j) exp(lp(t_j; x*)):
//   censored: exp(-S)
//   event:    clamp( dH0(time) * exp(1 + lp(time; x*) - S), 0, 1 )
// An event time that is not a jump time of h0 uses the nearest earlier
// increment and sets *used_earlier_jump. `raw` (if given) receives the
// pre-clamp value.
double acceptance_probability(double time, int event,
                              const std::vector<TveSpec>& specs,
                              const Eigen::VectorXd& beta, int target,
                              double candidate,
                              const Eigen::RowVectorXd& covariate_row,
                              const BaselineHazard& h0,
                              bool* used_earlier_jump = nullptr,
                              double* raw = nullptr);

// beta* ~ N(beta_hat, covariance) via symmetric eigendecomposition with
// negative eigenvalues clipped to zero.
Eigen::VectorXd draw_substantive_params(const CoxTveModel& model, Rng& rng);

// FCS multiple imputation by rejection sampling compatible with the
// substantive hazard model. Each iteration refits the substantive model on
// the current completed data, draws beta*, recomputes the Breslow baseline at
// beta*, draws each covariate model's parameters, and redraws every missing
// cell by propose/accept-reject (capped at config.rejection_cap proposals;
// the last proposal is kept and a warning recorded when the cap is hit).
ImputedDatasets impute_smc(const SurvivalDataset& ds,
                           const std::vector<TveSpec>& specs,
                           const MiConfig& config);

}  // namespace tvemi
