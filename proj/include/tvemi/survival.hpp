#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tvemi {

enum class CovariateKind { Binary, Continuous };

struct CovariateInfo {
  std::string name;
  CovariateKind kind = CovariateKind::Continuous;
};

using MaskMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Right-censored survival data. `x` holds NaN where `observed` is false; the
// mask is authoritative. Invariants enforced by make_dataset: finite times
// >= 0, event in {0,1}, no event at time 0, observed binary cells in {0,1}.
struct SurvivalDataset {
  std::vector<std::string> ids;
  Eigen::VectorXd time;
  Eigen::VectorXi event;
  Eigen::MatrixXd x;
  MaskMatrix observed;
  std::vector<CovariateInfo> covariates;

  Eigen::Index n() const { return time.size(); }
  Eigen::Index p() const { return x.cols(); }
  bool row_complete(Eigen::Index i) const {
    for (Eigen::Index k = 0; k < p(); ++k)
      if (!observed(i, k)) return false;
    return true;
  }
};

SurvivalDataset make_dataset(std::vector<std::string> ids, Eigen::VectorXd time,
                             Eigen::VectorXi event, Eigen::MatrixXd x,
                             MaskMatrix observed,
                             std::vector<CovariateInfo> covariates);

// Convenience for fully observed data.
SurvivalDataset make_complete_dataset(Eigen::VectorXd time,
                                      Eigen::VectorXi event, Eigen::MatrixXd x,
                                      std::vector<CovariateInfo> covariates);

int covariate_index(const SurvivalDataset& ds, const std::string& name);
std::vector<double> observed_event_times(const SurvivalDataset& ds);
std::vector<Eigen::Index> complete_rows(const SurvivalDataset& ds);
SurvivalDataset subset_rows(const SurvivalDataset& ds,
                            const std::vector<Eigen::Index>& rows);

// d(t) and n(t) at the distinct observed event times, ascending. A subject
// censored at t is still in the risk set at t; deaths count events only.
struct RiskSetCounts {
  Eigen::VectorXd times;
  Eigen::VectorXi deaths;   // d(t)
  Eigen::VectorXi at_risk;  // n(t) = #{i : T_i >= t}
};

RiskSetCounts risk_set_counts(const SurvivalDataset& ds);

// Right-continuous step function H(t) = sum of increments at jump times <= t.
struct CumulativeHazardEstimate {
  Eigen::VectorXd times;       // strictly increasing jump times
  Eigen::VectorXd increments;  // dH at each jump
  Eigen::VectorXd cumulative;  // running prefix sums

  double value_at(double t) const;
  // sum of increments over (a, b]
  double increment_sum(double a, double b) const;
};

CumulativeHazardEstimate make_cumhaz(Eigen::VectorXd times,
                                     Eigen::VectorXd increments);

// Breslow-form baseline uses the same step-function shape.
using BaselineHazard = CumulativeHazardEstimate;

// Nelson-Aalen estimate H(t) = sum d/n and its first-moment variant
// H1(t) = sum t*d/n, both over event times <= t.
struct NelsonAalenEstimate {
  CumulativeHazardEstimate h;
  CumulativeHazardEstimate h1;
};

NelsonAalenEstimate nelson_aalen(const SurvivalDataset& ds);

}  // namespace tvemi
