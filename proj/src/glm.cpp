#include "tvemi/glm.hpp"

#include <cmath>
#include <limits>

#include "tvemi/errors.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

namespace {

constexpr double kSeparationBound = 15.0;

// rank-revealing column selection; kept indices stay in original order
void split_rank(const Eigen::MatrixXd& X, std::vector<int>& kept,
                std::vector<int>& dropped) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  const auto& perm = qr.colsPermutation().indices();
  std::vector<bool> keep(X.cols(), false);
  for (int i = 0; i < rank; ++i) keep[perm[i]] = true;
  kept.clear();
  dropped.clear();
  for (int j = 0; j < X.cols(); ++j)
    (keep[j] ? kept : dropped).push_back(j);
}

Eigen::MatrixXd take_columns(const Eigen::MatrixXd& X,
                             const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = X.col(cols[j]);
  return out;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const char* context) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double lmax = es.eigenvalues().maxCoeff();
  const double lmin = es.eigenvalues().minCoeff();
  if (!(lmax > 0.0) || lmin <= 0.0 || lmin / lmax < 1e-14)
    throw SingularError(std::string(context) + ": singular matrix");
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

double logistic_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log p(y|eta) = y*eta - log(1 + e^eta), stable on both tails
    const double e = eta[i];
    ll += y[i] * e - (e > 0.0 ? e + std::log1p(std::exp(-e))
                              : std::log1p(std::exp(e)));
  }
  return ll;
}

}  // namespace

Eigen::VectorXd GlmFit::full_coef() const { return full_coef(coef); }

Eigen::VectorXd GlmFit::full_coef(const Eigen::VectorXd& kept_coef) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n_columns);
  for (std::size_t j = 0; j < kept.size(); ++j) out[kept[j]] = kept_coef[j];
  return out;
}

GlmFit ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DataError("ols: row count mismatch");
  GlmFit fit;
  fit.n = X.rows();
  fit.n_columns = static_cast<int>(X.cols());
  split_rank(X, fit.kept, fit.dropped);
  const Eigen::MatrixXd Xk = take_columns(X, fit.kept);
  const int rank = static_cast<int>(fit.kept.size());
  if (fit.n <= rank) throw DataError("ols: fewer rows than parameters");

  fit.cov = spd_inverse(Xk.transpose() * Xk, "ols");
  fit.coef = fit.cov * (Xk.transpose() * y);
  const Eigen::VectorXd resid = y - Xk * fit.coef;
  fit.sigma2 = resid.squaredNorm() / static_cast<double>(fit.n - rank);
  return fit;
}

GlmFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const std::vector<std::string>* names) {
  if (X.rows() != y.size()) throw DataError("logistic: row count mismatch");
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw DataError("logistic: response must be 0/1");

  GlmFit fit;
  fit.n = X.rows();
  fit.n_columns = static_cast<int>(X.cols());
  split_rank(X, fit.kept, fit.dropped);
  const Eigen::MatrixXd Xk = take_columns(X, fit.kept);
  const int rank = static_cast<int>(fit.kept.size());
  if (fit.n <= rank) throw DataError("logistic: fewer rows than parameters");

  auto check_separation = [&](const Eigen::VectorXd& beta) {
    for (int j = 0; j < rank; ++j)
      if (std::fabs(beta[j]) > kSeparationBound) {
        std::string label = "column " + std::to_string(fit.kept[j]);
        if (names) label += " (" + (*names)[fit.kept[j]] + ")";
        throw SeparationError("logistic: separation detected at " + label);
      }
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(rank);
  Eigen::VectorXd eta = Xk * beta;
  double ll = logistic_loglik(eta, y);
  Eigen::MatrixXd info(rank, rank);
  bool converged = false;
  for (int it = 0; it < 50 && !converged; ++it) {
    const Eigen::VectorXd mu = eta.unaryExpr([](double e) { return expit(e); });
    const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
    const Eigen::VectorXd score = Xk.transpose() * (y - mu);
    info = Xk.transpose() * w.asDiagonal() * Xk;
    const Eigen::VectorXd dir = spd_inverse(info, "logistic") * score;

    // the loglik is a long accumulated sum whose rounding residue between two
    // nearby points grows with the number of terms, so near the optimum the
    // true gain of a step falls below that scale and comparisons become noise
    const double noise = 1024.0 * std::numeric_limits<double>::epsilon() *
                         (std::fabs(ll) + 1.0);
    double step = 1.0;
    bool accepted = false, have_finite = false;
    Eigen::VectorXd cand, widest;
    double cand_ll = -std::numeric_limits<double>::infinity();
    double widest_ll = 0.0;
    for (int h = 0; h <= 20; ++h) {
      cand = beta + step * dir;
      cand_ll = logistic_loglik(Xk * cand, y);
      if (std::isfinite(cand_ll)) {
        if (!have_finite) {
          have_finite = true;
          widest = cand;
          widest_ll = cand_ll;
        }
        if (cand_ll >= ll - noise) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!have_finite) throw ConvergenceError("logistic: step halving failed");
      // concave loglik and an ascent direction: a finite step that still
      // compares worse is rounding noise, so take the widest finite step
      cand = widest;
      cand_ll = widest_ll;
    }
    const double delta = cand_ll - ll;
    beta = cand;
    eta = Xk * beta;
    ll = cand_ll;
    check_separation(beta);
    const Eigen::VectorXd mu2 = eta.unaryExpr([](double e) { return expit(e); });
    if (delta < 1e-10 &&
        (Xk.transpose() * (y - mu2)).cwiseAbs().maxCoeff() < 1e-6)
      converged = true;
  }
  if (!converged) {
    check_separation(beta);
    throw ConvergenceError("logistic: IRLS did not converge");
  }

  const Eigen::VectorXd mu = eta.unaryExpr([](double e) { return expit(e); });
  const Eigen::VectorXd w = mu.array() * (1.0 - mu.array());
  fit.coef = beta;
  fit.cov = spd_inverse(Xk.transpose() * w.asDiagonal() * Xk, "logistic");
  return fit;
}

Eigen::VectorXd mvn_draw(const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& cov, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + es.eigenvectors() * (scale.asDiagonal() * z);
}

LinearDraw posterior_draw_linear(const GlmFit& fit, Rng& rng) {
  const long df = fit.n - static_cast<long>(fit.kept.size());
  if (df <= 0) throw DataError("posterior draw: no residual degrees of freedom");
  LinearDraw draw;
  if (fit.sigma2 <= 0.0) {
    // perfect fit: degenerate at the point estimate
    draw.coef = fit.full_coef();
    draw.sigma2 = 0.0;
    return draw;
  }
  const double g = rng.chi_squared(static_cast<double>(df));
  draw.sigma2 = fit.sigma2 * static_cast<double>(df) / g;
  const Eigen::VectorXd kept =
      mvn_draw(fit.coef, fit.cov * draw.sigma2, rng);
  draw.coef = fit.full_coef(kept);
  return draw;
}

Eigen::VectorXd posterior_draw_logistic(const GlmFit& fit, Rng& rng) {
  return fit.full_coef(mvn_draw(fit.coef, fit.cov, rng));
}

}  // namespace tvemi
