#pragma once

#include <Eigen/Dense>
#include <vector>

namespace tvemi {

inline double expit(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// Linear-interpolation sample quantile (R type 7): h = (n-1)p,
// q = v[floor(h)] + frac(h) * (v[floor(h)+1] - v[floor(h)]). Input must be
// sorted ascending.
double quantile_type7(const std::vector<double>& sorted, double p);

// Regularized incomplete gamma P(a, x) and Q(a, x) = 1 - P(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

// Upper-tail probabilities used by the Wald tests.
double chisq_sf(double x, double df);
double fisher_f_sf(double x, double df1, double df2);

// Unbiased sample covariance of rows of m (n x p), n >= 2.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows);

}  // namespace tvemi
