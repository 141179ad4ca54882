#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "tvemi/survival.hpp"
#include "tvemi/tve.hpp"

namespace tvemi {

struct MiConfig {
  int m = 5;
  int fcs_iterations = 10;
  std::uint64_t seed = 0;
  bool include_h1 = false;          // add the first-moment hazard column
  bool include_interactions = false;  // add other-covariate x hazard columns
  int rejection_cap = 1000;         // rejection-sampling imputer only
};

struct ImputationDiagnostics {
  std::vector<std::string> warnings;
  int fcs_iterations = 0;
  long total_cells = 0;             // missing cells imputed per completed copy
  // rejection-sampling imputer only:
  long total_proposals = 0;
  long rejection_cap_hits = 0;
  long event_acceptance_evaluations = 0;
  long event_acceptance_clamped = 0;  // raw probability exceeded 1
  std::vector<long> proposals_per_subject;

  double clamp_fraction() const {
    return event_acceptance_evaluations == 0
               ? 0.0
               : static_cast<double>(event_acceptance_clamped) /
                     static_cast<double>(event_acceptance_evaluations);
  }
};

// M completed covariate matrices over a shared incomplete dataset. Rows align
// with `base`; observed cells are identical across copies.
struct ImputedDatasets {
  SurvivalDataset base;
  std::vector<Eigen::MatrixXd> completed;
  std::vector<std::uint64_t> stream_seeds;
  ImputationDiagnostics diagnostics;

  int m() const { return static_cast<int>(completed.size()); }
  SurvivalDataset dataset(int j) const;  // j-th copy as a complete dataset
};

struct ImputationDesign {
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;
};

// Starting fill shared by the FCS imputers: observed mean for continuous
// covariates, observed mode for binary ones (ties fill with 0).
Eigen::MatrixXd initial_completed_values(const SurvivalDataset& ds);

// Design matrix for regressing the target covariate on the rest of the data:
// intercept, the other covariates (current completed values), the event
// indicator times the target's time basis evaluated at follow-up time, and
// cumulative-hazard columns. For Step specs the hazard enters split by
// period: per-period totals H*_k for fully elapsed periods plus the partial
// tail, replacing the single H(T) column.
ImputationDesign build_imputation_design(const SurvivalDataset& ds, int target,
                                         const std::vector<TveSpec>& specs,
                                         const Eigen::MatrixXd& current,
                                         const NelsonAalenEstimate& na,
                                         const MiConfig& config);

// FCS multiple imputation with approximate (regression-based) conditional
// models: logistic for binary targets, Gaussian for continuous ones, each
// with proper posterior parameter draws. Stream m is seeded seed ^ m.
ImputedDatasets impute_approx(const SurvivalDataset& ds,
                              const std::vector<TveSpec>& specs,
                              const MiConfig& config);

}  // namespace tvemi
