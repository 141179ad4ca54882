#include "tvemi/cox_tve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tvemi/errors.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

namespace {

constexpr int kMaxPatterns = 64;

// Precomputed quantities for one (dataset, specs, covariate matrix) triple.
// Covariates are mean-centered internally; the partial likelihood, score and
// information are exactly invariant to the shift (it cancels between the
// death terms and the risk-set log-sums), so estimates are unaffected while
// exp() stays in range.
class Engine {
 public:
  Engine(const SurvivalDataset& ds, const std::vector<TveSpec>& specs,
         const Eigen::MatrixXd& completed)
      : specs_(specs) {
    n_ = ds.n();
    p_ = ds.p();
    if (static_cast<Eigen::Index>(specs.size()) != p_)
      throw ConfigError("one tve spec per covariate required");
    if (completed.rows() != n_ || completed.cols() != p_)
      throw DataError("completed covariate matrix shape mismatch");
    if (!completed.allFinite())
      throw DataError("completed covariate matrix contains missing values");

    dims_.resize(p_);
    offsets_.resize(p_);
    total_dim_ = 0;
    for (Eigen::Index k = 0; k < p_; ++k) {
      dims_[k] = specs[k].dimension();
      offsets_[k] = total_dim_;
      total_dim_ += dims_[k];
    }

    center_ = completed.colwise().mean();
    z_ = completed.rowwise() - center_;

    order_.resize(n_);
    for (Eigen::Index i = 0; i < n_; ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(), [&](Eigen::Index a, Eigen::Index b) {
      return ds.time[a] != ds.time[b] ? ds.time[a] < ds.time[b] : a < b;
    });

    // group tied times; keep groups containing at least one event
    Eigen::Index pos = 0;
    while (pos < n_) {
      const double t = ds.time[order_[pos]];
      Eigen::Index next = pos;
      int d = 0;
      while (next < n_ && ds.time[order_[next]] == t) {
        d += ds.event[order_[next]];
        ++next;
      }
      if (d > 0) {
        fail_times_.push_back(t);
        fail_deaths_.push_back(d);
        fail_pos_.push_back(pos);
      }
      pos = next;
    }
    n_fail_ = static_cast<Eigen::Index>(fail_times_.size());
    if (n_fail_ == 0) throw DataError("no events in data");

    // basis at failure times, death sums, and the death part of the score
    basis_.resize(p_);
    Eigen::VectorXd b;
    for (Eigen::Index k = 0; k < p_; ++k) {
      basis_[k].resize(n_fail_, dims_[k]);
      b.resize(dims_[k]);
      for (Eigen::Index j = 0; j < n_fail_; ++j) {
        basis_into(specs[k], fail_times_[j], b);
        basis_[k].row(j) = b.transpose();
      }
    }
    death_sums_ = Eigen::MatrixXd::Zero(n_fail_, p_);
    for (Eigen::Index j = 0; j < n_fail_; ++j) {
      const double t = fail_times_[j];
      for (Eigen::Index pos2 = fail_pos_[j];
           pos2 < n_ && ds.time[order_[pos2]] == t; ++pos2) {
        const Eigen::Index i = order_[pos2];
        if (ds.event[i] == 1) death_sums_.row(j) += z_.row(i);
      }
    }
    death_score_ = Eigen::VectorXd::Zero(total_dim_);
    for (Eigen::Index k = 0; k < p_; ++k)
      death_score_.segment(offsets_[k], dims_[k]) =
          basis_[k].transpose() * death_sums_.col(k);

    detect_patterns();
  }

  Eigen::Index total_dim() const { return total_dim_; }
  Eigen::Index n_fail() const { return n_fail_; }
  Eigen::Index offset(Eigen::Index k) const { return offsets_[k]; }
  Eigen::Index dim(Eigen::Index k) const { return dims_[k]; }
  double fail_time(Eigen::Index j) const { return fail_times_[j]; }
  int fail_deaths(Eigen::Index j) const { return fail_deaths_[j]; }

  struct Eval {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd info;
    Eigen::VectorXd risk_denominators;  // uncentered sum exp(lp) per failure time
  };

  // want_info: assemble score and information; want_denominators: recover the
  // uncentered risk-set denominators (for the Breslow baseline).
  Eval evaluate(const Eigen::VectorXd& beta, bool want_info,
                bool want_denominators = false) const {
    if (beta.size() != total_dim_)
      throw ConfigError("coefficient vector has wrong length");

    // time-varying effect of each covariate at each failure time
    Eigen::MatrixXd effects(n_fail_, p_);
    for (Eigen::Index k = 0; k < p_; ++k)
      effects.col(k) = basis_[k] * beta.segment(offsets_[k], dims_[k]);

    Eval out;
    out.loglik = death_score_.dot(beta);
    if (want_info) {
      out.score = death_score_;
      out.info = Eigen::MatrixXd::Zero(total_dim_, total_dim_);
    }
    if (want_denominators) out.risk_denominators.resize(n_fail_);

    Eigen::VectorXd m1(p_);
    Eigen::MatrixXd m2(p_, p_);
    std::vector<int> counts;
    if (use_patterns_) counts.assign(pattern_count_, 0);
    Eigen::Index cursor = n_;
    if (use_patterns_) {
      cursor = fail_pos_[0];
      for (Eigen::Index pos = cursor; pos < n_; ++pos)
        ++counts[pattern_of_[order_[pos]]];
    }

    for (Eigen::Index j = 0; j < n_fail_; ++j) {
      if (use_patterns_) {
        while (cursor < fail_pos_[j]) {
          --counts[pattern_of_[order_[cursor]]];
          ++cursor;
        }
      }
      const auto c = effects.row(j);
      double m0 = 0.0;
      if (want_info) {
        m1.setZero();
        m2.setZero();
      }
      auto accumulate = [&](const auto& row, double weight) {
        const double r = weight * std::exp(c.dot(row));
        m0 += r;
        if (want_info) {
          for (Eigen::Index a = 0; a < p_; ++a) {
            const double ra = r * row[a];
            m1[a] += ra;
            for (Eigen::Index b = 0; b <= a; ++b) m2(a, b) += ra * row[b];
          }
        }
      };
      if (use_patterns_) {
        for (int q = 0; q < pattern_count_; ++q)
          if (counts[q] > 0) accumulate(patterns_.row(q), counts[q]);
      } else {
        for (Eigen::Index pos = fail_pos_[j]; pos < n_; ++pos)
          accumulate(z_.row(order_[pos]), 1.0);
      }

      const double d = fail_deaths_[j];
      out.loglik -= d * std::log(m0);
      if (want_denominators) {
        // undo the centering shift: sum exp(lp) = m0 * exp(c . center)
        const double shift = c.dot(center_);
        out.risk_denominators[j] = m0 * std::exp(shift);
      }
      if (!want_info) continue;

      for (Eigen::Index a = 0; a < p_; ++a)
        for (Eigen::Index b = a + 1; b < p_; ++b) m2(a, b) = m2(b, a);
      const Eigen::VectorXd mean = m1 / m0;
      for (Eigen::Index k = 0; k < p_; ++k)
        out.score.segment(offsets_[k], dims_[k]).noalias() -=
            d * mean[k] * basis_[k].row(j).transpose();
      for (Eigen::Index k = 0; k < p_; ++k)
        for (Eigen::Index l = 0; l < p_; ++l) {
          const double v = m2(k, l) / m0 - mean[k] * mean[l];
          out.info
              .block(offsets_[k], offsets_[l], dims_[k], dims_[l])
              .noalias() +=
              d * v * (basis_[k].row(j).transpose() * basis_[l].row(j));
        }
    }
    return out;
  }

 private:
  void detect_patterns() {
    std::map<std::vector<double>, int> seen;
    pattern_of_.resize(n_);
    std::vector<double> key(p_);
    for (Eigen::Index i = 0; i < n_; ++i) {
      for (Eigen::Index k = 0; k < p_; ++k) key[k] = z_(i, k);
      auto [it, inserted] = seen.emplace(key, static_cast<int>(seen.size()));
      if (seen.size() > kMaxPatterns) {
        use_patterns_ = false;
        return;
      }
      pattern_of_[i] = it->second;
    }
    // remap to lexicographic order so accumulation order is canonical
    pattern_count_ = static_cast<int>(seen.size());
    std::vector<int> remap(pattern_count_);
    patterns_.resize(pattern_count_, p_);
    int next = 0;
    for (const auto& [row, id] : seen) {
      remap[id] = next;
      for (Eigen::Index k = 0; k < p_; ++k) patterns_(next, k) = row[k];
      ++next;
    }
    for (Eigen::Index i = 0; i < n_; ++i)
      pattern_of_[i] = remap[pattern_of_[i]];
    use_patterns_ = true;
  }

  const std::vector<TveSpec>& specs_;
  Eigen::Index n_ = 0, p_ = 0, total_dim_ = 0, n_fail_ = 0;
  std::vector<Eigen::Index> dims_, offsets_;
  Eigen::RowVectorXd center_;
  Eigen::MatrixXd z_;
  std::vector<Eigen::Index> order_;
  std::vector<double> fail_times_;
  std::vector<int> fail_deaths_;
  std::vector<Eigen::Index> fail_pos_;
  std::vector<Eigen::MatrixXd> basis_;
  Eigen::MatrixXd death_sums_;
  Eigen::VectorXd death_score_;

  bool use_patterns_ = false;
  int pattern_count_ = 0;
  std::vector<int> pattern_of_;
  Eigen::MatrixXd patterns_;
};

struct Inverse {
  Eigen::MatrixXd inv;
  double rcond = 0.0;
};

Inverse invert_information(const Eigen::MatrixXd& info, double rcond_min,
                           const char* context) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  const Eigen::VectorXd& lambda = es.eigenvalues();
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();
  if (!(lmax > 0.0) || lmin <= 0.0 || lmin / lmax < rcond_min)
    throw SingularError(std::string(context) +
                        ": singular information matrix (no usable contrast)");
  Inverse out;
  out.inv = es.eigenvectors() *
            lambda.cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose();
  out.rcond = lmin / lmax;
  return out;
}

}  // namespace

int CoxTveModel::block_offset(int k) const {
  int off = 0;
  for (int j = 0; j < k; ++j) off += specs[j].dimension();
  return off;
}

Eigen::VectorXd CoxTveModel::block_coefficients(int k) const {
  return coefficients.segment(block_offset(k), block_dim(k));
}

Eigen::MatrixXd CoxTveModel::block_covariance(int k) const {
  const int off = block_offset(k);
  return covariance.block(off, off, block_dim(k), block_dim(k));
}

double CoxTveModel::effect_at(int k, double t) const {
  return tve_eval(specs[k], block_coefficients(k), t);
}

CoxTveModel fit_cox_tve(const SurvivalDataset& ds,
                        const std::vector<TveSpec>& specs,
                        const Eigen::MatrixXd& completed,
                        const CoxFitOptions& options) {
  Engine engine(ds, specs, completed);
  const Eigen::Index d = engine.total_dim();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  if (options.start) {
    if (options.start->size() != d)
      throw ConfigError("start vector has wrong length");
    beta = *options.start;
  }

  Engine::Eval cur = engine.evaluate(beta, true);
  if (!std::isfinite(cur.loglik))
    throw NumericError("partial likelihood not finite at start");

  bool converged = false;
  int iterations = 0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    iterations = it;
    const Inverse inv =
        invert_information(cur.info, options.rcond_min, "cox fit");
    const Eigen::VectorXd direction = inv.inv * cur.score;

    // the partial loglik is a long accumulated sum whose rounding residue
    // between two nearby points grows with the number of terms, so near the
    // optimum the true gain of a step falls below that scale and the
    // comparison becomes noise
    const double noise = 1024.0 * std::numeric_limits<double>::epsilon() *
                         (std::fabs(cur.loglik) + 1.0);
    double step = 1.0;
    double cand_loglik = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd cand, widest;
    double widest_loglik = 0.0;
    bool accepted = false, have_finite = false;
    for (int h = 0; h <= options.max_step_halvings; ++h) {
      cand = beta + step * direction;
      cand_loglik = engine.evaluate(cand, false).loglik;
      if (std::isfinite(cand_loglik)) {
        if (!have_finite) {
          have_finite = true;
          widest = cand;
          widest_loglik = cand_loglik;
        }
        if (cand_loglik >= cur.loglik - noise) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!have_finite)
        throw ConvergenceError(
            "cox fit: step halving failed to improve the likelihood");
      // concave loglik and an ascent direction: a finite step that still
      // compares worse is rounding noise, so take the widest finite step
      cand = widest;
      cand_loglik = widest_loglik;
    }

    const double delta_loglik = cand_loglik - cur.loglik;
    beta = cand;
    cur = engine.evaluate(beta, true);

    if (beta.cwiseAbs().maxCoeff() > options.divergence_bound)
      throw DivergenceError(
          "cox fit: coefficient diverged (monotone partial likelihood)");

    if (cur.score.cwiseAbs().maxCoeff() < options.score_tol &&
        std::fabs(delta_loglik) < options.loglik_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("cox fit: Newton-Raphson did not converge");

  CoxTveModel model;
  model.covariate_names.reserve(ds.covariates.size());
  for (const auto& c : ds.covariates) model.covariate_names.push_back(c.name);
  model.specs = specs;
  model.coefficients = beta;
  model.covariance =
      invert_information(cur.info, options.rcond_min, "cox fit").inv;
  model.log_partial_likelihood = cur.loglik;
  model.n_subjects = static_cast<int>(ds.n());
  model.n_events = ds.event.sum();
  model.newton_iterations = iterations;
  model.max_abs_score = cur.score.cwiseAbs().maxCoeff();
  model.max_time = ds.time.maxCoeff();
  std::vector<double> follow_up(ds.time.data(), ds.time.data() + ds.n());
  std::sort(follow_up.begin(), follow_up.end());
  model.t99 = quantile_type7(follow_up, 0.99);
  return model;
}

CoxTveModel fit_cox_tve(const SurvivalDataset& ds,
                        const std::vector<TveSpec>& specs,
                        const CoxFitOptions& options) {
  if (!ds.observed.all())
    throw DataError("fit on incomplete data: impute first or subset to "
                    "complete rows");
  return fit_cox_tve(ds, specs, ds.x, options);
}

double cox_tve_loglik(const SurvivalDataset& ds,
                      const std::vector<TveSpec>& specs,
                      const Eigen::MatrixXd& completed,
                      const Eigen::VectorXd& beta) {
  return Engine(ds, specs, completed).evaluate(beta, false).loglik;
}

Eigen::VectorXd cox_tve_score(const SurvivalDataset& ds,
                              const std::vector<TveSpec>& specs,
                              const Eigen::MatrixXd& completed,
                              const Eigen::VectorXd& beta) {
  return Engine(ds, specs, completed).evaluate(beta, true).score;
}

BaselineHazard breslow_baseline(const SurvivalDataset& ds,
                                const CoxTveModel& model,
                                const Eigen::MatrixXd& completed) {
  Engine engine(ds, model.specs, completed);
  const Engine::Eval ev = engine.evaluate(model.coefficients, false, true);
  const Eigen::Index m = engine.n_fail();
  Eigen::VectorXd times(m), increments(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    times[j] = engine.fail_time(j);
    const double denom = ev.risk_denominators[j];
    if (!(denom > 0.0) || !std::isfinite(denom))
      throw NumericError("breslow baseline: risk-set denominator not positive");
    increments[j] = static_cast<double>(engine.fail_deaths(j)) / denom;
  }
  return make_cumhaz(std::move(times), std::move(increments));
}

BaselineHazard breslow_baseline(const SurvivalDataset& ds,
                                const CoxTveModel& model) {
  if (!ds.observed.all())
    throw DataError("breslow baseline on incomplete data");
  return breslow_baseline(ds, model, ds.x);
}

TveCurve tve_curve(const TveSpec& spec, const Eigen::VectorXd& block_coefs,
                   const Eigen::MatrixXd& block_cov,
                   const Eigen::VectorXd& times, double max_time) {
  const int d = spec.dimension();
  if (block_coefs.size() != d || block_cov.rows() != d || block_cov.cols() != d)
    throw ConfigError("tve curve: coefficient/covariance size mismatch");
  TveCurve out;
  out.times = times;
  out.estimate.resize(times.size());
  out.lower95.resize(times.size());
  out.upper95.resize(times.size());
  out.extrapolated.resize(times.size());
  Eigen::VectorXd b(d);
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    basis_into(spec, times[i], b);
    const double est = b.dot(block_coefs);
    const double var = std::max(0.0, b.dot(block_cov * b));
    const double half = 1.96 * std::sqrt(var);
    out.estimate[i] = est;
    out.lower95[i] = est - half;
    out.upper95[i] = est + half;
    out.extrapolated[i] = times[i] < 0.0 || times[i] > max_time;
  }
  return out;
}

TveCurve tve_curve(const CoxTveModel& model, int covariate,
                   const Eigen::VectorXd& times) {
  return tve_curve(model.specs[covariate], model.block_coefficients(covariate),
                   model.block_covariance(covariate), times, model.max_time);
}

TveCurve tve_curve(const CoxTveModel& model, int covariate) {
  return tve_curve(model, covariate,
                   Eigen::VectorXd::LinSpaced(100, 0.0, model.t99));
}

WaldTest wald_block_test(const Eigen::VectorXd& coefs,
                         const Eigen::MatrixXd& cov,
                         const std::vector<int>& indices) {
  const int k = static_cast<int>(indices.size());
  if (k == 0) throw ConfigError("wald test: empty index set");
  Eigen::VectorXd theta(k);
  Eigen::MatrixXd v(k, k);
  for (int a = 0; a < k; ++a) {
    theta[a] = coefs[indices[a]];
    for (int b = 0; b < k; ++b) v(a, b) = cov(indices[a], indices[b]);
  }
  const Inverse inv = invert_information(v, 1e-14, "wald test");
  WaldTest out;
  out.statistic = theta.dot(inv.inv * theta);
  out.df = k;
  out.p_value = chisq_sf(out.statistic, k);
  return out;
}

WaldTest ph_wald_test(const CoxTveModel& model, int covariate) {
  if (model.specs[covariate].form() == TveSpec::Form::Constant)
    throw ConfigError("ph test needs a non-constant tve spec");
  const int off = model.block_offset(covariate);
  const int dim = model.block_dim(covariate);
  std::vector<int> indices;
  for (int i = 1; i < dim; ++i) indices.push_back(off + i);
  return wald_block_test(model.coefficients, model.covariance, indices);
}

}  // namespace tvemi
