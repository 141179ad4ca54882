#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tvemi/cox_tve.hpp"
#include "tvemi/mi_approx.hpp"

namespace tvemi {

// Rubin's rules: Q_bar = mean estimate, W = mean within-imputation
// covariance, B = between-imputation sample covariance (unbiased), and
// total = W + (1 + 1/M) B.
struct PooledEstimate {
  Eigen::VectorXd q_bar;
  Eigen::MatrixXd within;
  Eigen::MatrixXd between;
  Eigen::MatrixXd total;
  int m = 0;
};

PooledEstimate rubin_pool(const std::vector<Eigen::VectorXd>& estimates,
                          const std::vector<Eigen::MatrixXd>& covariances);

enum class WaldMode { ChiSquare, D1 };

struct PooledWaldTest {
  double statistic = 0.0;
  double df1 = 0.0;
  double df2 = 0.0;  // 0 in chi-square mode
  double p_value = 1.0;
  WaldMode mode = WaldMode::ChiSquare;
};

// Joint test of the pooled coefficients at `indices` against zero.
// ChiSquare: theta' T_sub^-1 theta on df1 = k. D1: the multivariate
// small-sample statistic referencing F(k, df2).
PooledWaldTest pooled_wald(const PooledEstimate& pooled,
                           const std::vector<int>& indices,
                           WaldMode mode = WaldMode::ChiSquare);

// Pooled fit of one model form across all completed datasets.
struct PooledFit {
  std::vector<TveSpec> specs;
  std::vector<std::string> covariate_names;
  PooledEstimate pooled;
  double max_time = 0.0;
  double t99 = 0.0;
};

PooledFit pooled_cox_tve(const ImputedDatasets& imputed,
                         const std::vector<TveSpec>& specs,
                         const CoxFitOptions& options = {});

// Pooled proportional-hazards test for one covariate (block minus its
// leading coefficient).
PooledWaldTest pooled_ph_test(const PooledFit& fit, int covariate,
                              WaldMode mode = WaldMode::ChiSquare);

TveCurve pooled_tve_curve(const PooledFit& fit, int covariate,
                          const Eigen::VectorXd& times);

struct SelectOptions {
  double alpha = 0.01;
  std::vector<int> rcs_sizes = {3, 4, 5};  // candidate forms: linear + these
  WaldMode wald_mode = WaldMode::ChiSquare;
  bool knots_from_all_times = false;  // default: observed event times only
};

struct SelectionStep {
  int covariate = 0;
  TveSpec spec = TveSpec::constant();
  double p_value = 1.0;
  bool accepted = false;
  std::string note;  // set when the candidate fit failed
};

struct SelectionResult {
  std::vector<TveSpec> final_specs;
  std::vector<std::string> covariate_names;
  PooledFit final_fit;
  std::vector<SelectionStep> trace;
  double alpha = 0.0;
};

// Forward selection of time-varying effects over the pooled fits: starting
// from all-Constant, repeatedly tries every (covariate without a TVE, form)
// pair, adopts the smallest pooled Wald p below alpha (ties broken by
// smaller form dimension, then covariate order), and stops when none pass.
// Knots for the rcs forms are computed once from the original data's event
// times. Candidates whose fit fails score p = 1.
SelectionResult mi_mtve_select(const ImputedDatasets& imputed,
                               const SelectOptions& options = {});

}  // namespace tvemi
