#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tvemi/random.hpp"

namespace tvemi {

// Least-squares or logistic fit used by the imputation models. Collinear
// columns are detected by rank-revealing QR and dropped (recorded in
// `dropped`); `coef`/`cov` cover the kept columns only, `full_coef()` expands
// with zeros so predictions can use the original design.
struct GlmFit {
  std::vector<int> kept;
  std::vector<int> dropped;
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov;    // (X'X)^-1 for linear, inverse information for logistic
  double sigma2 = 0.0;    // linear: RSS / (n - rank)
  long n = 0;
  int n_columns = 0;

  Eigen::VectorXd full_coef() const;
  Eigen::VectorXd full_coef(const Eigen::VectorXd& kept_coef) const;
};

GlmFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// IRLS with step halving; throws SeparationError when any |coef| exceeds 15
// (names the offending column when `names` given).
GlmFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<std::string>* names = nullptr);

// Draw from N(mean, cov) through a symmetric eigendecomposition with tiny
// negative eigenvalues clipped to zero.
Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& cov, Rng& rng);

struct LinearDraw {
  Eigen::VectorXd coef;  // full-length, zeros at dropped columns
  double sigma2 = 0.0;
};

// sigma2* = sigma2_hat (n - rank) / chi2(n - rank), then
// coef* ~ N(coef_hat, (X'X)^-1 sigma2*). Zero residual variance degenerates
// to the point estimate.
LinearDraw posterior_draw_linear(const GlmFit& fit, Rng& rng);

// coef* ~ N(coef_hat, inverse information), full-length.
Eigen::VectorXd posterior_draw_logistic(const GlmFit& fit, Rng& rng);

}  // namespace tvemi
