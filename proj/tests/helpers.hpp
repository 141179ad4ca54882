#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvemi/survival.hpp"

namespace test_helpers {

// times (1,2,2,3,4,5), events (1,1,1,0,1,0): three distinct event times with
// a tie at t=2. Hand-computed Nelson-Aalen:
//   H(1)=1/6, H(2)=1/6+2/5=17/30, H(4)=17/30+1/2=16/15
//   H1(1)=1/6, H1(2)=1/6+4/5=29/30, H1(4)=29/30+2=89/30
inline tvemi::SurvivalDataset tied_fixture() {
  Eigen::VectorXd time(6);
  time << 1, 2, 2, 3, 4, 5;
  Eigen::VectorXi event(6);
  event << 1, 1, 1, 0, 1, 0;
  Eigen::MatrixXd x(6, 2);
  x << 0, 0.5, 1, -1.2, 0, 2.0, 1, 0.3, 0, -0.7, 1, 1.1;
  return tvemi::make_complete_dataset(
      time, event, x,
      {{"x1", tvemi::CovariateKind::Binary},
       {"x2", tvemi::CovariateKind::Continuous}});
}

// 7 subjects, 1 covariate, tie at t=1; brute-force partial likelihood
// maximizer frozen from an independent implementation.
inline tvemi::SurvivalDataset cox_oracle_fixture() {
  Eigen::VectorXd time(7);
  time << 1, 1, 2, 3, 3, 4, 5;
  Eigen::VectorXi event(7);
  event << 1, 1, 0, 1, 1, 1, 0;
  Eigen::MatrixXd x(7, 1);
  x << 0.5, -1.0, 2.0, 0.0, 1.5, -0.5, 1.0;
  return tvemi::make_complete_dataset(
      time, event, x, {{"z", tvemi::CovariateKind::Continuous}});
}
inline constexpr double kCoxOracleBeta = -0.47902768204225554;
inline constexpr double kCoxOracleLoglik = -6.947366605688444;
inline constexpr double kCoxLoglikAtZero = -7.357556200910353;
inline constexpr double kCoxLoglikAtP3 = -8.0526519546203001;

}  // namespace test_helpers
