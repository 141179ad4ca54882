#include "tvemi/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tvemi/errors.hpp"

namespace tvemi {

SurvivalDataset make_dataset(std::vector<std::string> ids, Eigen::VectorXd time,
                             Eigen::VectorXi event, Eigen::MatrixXd x,
                             MaskMatrix observed,
                             std::vector<CovariateInfo> covariates) {
  const Eigen::Index n = time.size();
  const Eigen::Index p = x.cols();
  if (event.size() != n || x.rows() != n || observed.rows() != n ||
      observed.cols() != p ||
      covariates.size() != static_cast<std::size_t>(p) ||
      ids.size() != static_cast<std::size_t>(n))
    throw DataError("dataset fields have inconsistent shapes");

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(time[i]) || time[i] < 0.0)
      throw DataError("subject " + ids[i] + ": time must be finite and >= 0");
    if (event[i] != 0 && event[i] != 1)
      throw DataError("subject " + ids[i] + ": event must be 0 or 1");
    if (time[i] == 0.0 && event[i] == 1)
      throw DataError("subject " + ids[i] + ": event at time 0");
    for (Eigen::Index k = 0; k < p; ++k) {
      if (!observed(i, k)) {
        x(i, k) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      if (!std::isfinite(x(i, k)))
        throw DataError("subject " + ids[i] + ", covariate " +
                        covariates[k].name + ": non-finite value");
      if (covariates[k].kind == CovariateKind::Binary && x(i, k) != 0.0 &&
          x(i, k) != 1.0)
        throw DataError("subject " + ids[i] + ", covariate " +
                        covariates[k].name + ": binary value not in {0,1}");
    }
  }
  return SurvivalDataset{std::move(ids),      std::move(time),
                         std::move(event),    std::move(x),
                         std::move(observed), std::move(covariates)};
}

SurvivalDataset make_complete_dataset(Eigen::VectorXd time,
                                      Eigen::VectorXi event, Eigen::MatrixXd x,
                                      std::vector<CovariateInfo> covariates) {
  const Eigen::Index n = time.size();
  std::vector<std::string> ids(n);
  for (Eigen::Index i = 0; i < n; ++i) ids[i] = std::to_string(i + 1);
  MaskMatrix observed = MaskMatrix::Constant(n, x.cols(), true);
  return make_dataset(std::move(ids), std::move(time), std::move(event),
                      std::move(x), std::move(observed), std::move(covariates));
}

int covariate_index(const SurvivalDataset& ds, const std::string& name) {
  for (std::size_t k = 0; k < ds.covariates.size(); ++k)
    if (ds.covariates[k].name == name) return static_cast<int>(k);
  throw DataError("no covariate named " + name);
}

std::vector<double> observed_event_times(const SurvivalDataset& ds) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (ds.event[i] == 1) out.push_back(ds.time[i]);
  return out;
}

std::vector<Eigen::Index> complete_rows(const SurvivalDataset& ds) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < ds.n(); ++i)
    if (ds.row_complete(i)) rows.push_back(i);
  return rows;
}

SurvivalDataset subset_rows(const SurvivalDataset& ds,
                            const std::vector<Eigen::Index>& rows) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  std::vector<std::string> ids(m);
  Eigen::VectorXd time(m);
  Eigen::VectorXi event(m);
  Eigen::MatrixXd x(m, ds.p());
  MaskMatrix observed(m, ds.p());
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index i = rows[j];
    ids[j] = ds.ids[i];
    time[j] = ds.time[i];
    event[j] = ds.event[i];
    x.row(j) = ds.x.row(i);
    observed.row(j) = ds.observed.row(i);
  }
  return make_dataset(std::move(ids), std::move(time), std::move(event),
                      std::move(x), std::move(observed), ds.covariates);
}

RiskSetCounts risk_set_counts(const SurvivalDataset& ds) {
  const Eigen::Index n = ds.n();
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return ds.time[a] < ds.time[b];
  });

  std::vector<double> times;
  std::vector<int> deaths, at_risk;
  Eigen::Index pos = 0;
  while (pos < n) {
    const double t = ds.time[order[pos]];
    Eigen::Index next = pos;
    int d = 0;
    while (next < n && ds.time[order[next]] == t) {
      d += ds.event[order[next]];
      ++next;
    }
    if (d > 0) {
      times.push_back(t);
      deaths.push_back(d);
      at_risk.push_back(static_cast<int>(n - pos));
    }
    pos = next;
  }

  RiskSetCounts out;
  out.times = Eigen::Map<Eigen::VectorXd>(times.data(), times.size());
  out.deaths = Eigen::Map<Eigen::VectorXi>(deaths.data(), deaths.size());
  out.at_risk = Eigen::Map<Eigen::VectorXi>(at_risk.data(), at_risk.size());
  return out;
}

CumulativeHazardEstimate make_cumhaz(Eigen::VectorXd times,
                                     Eigen::VectorXd increments) {
  if (times.size() != increments.size())
    throw DataError("cumulative hazard: times/increments length mismatch");
  for (Eigen::Index j = 0; j + 1 < times.size(); ++j)
    if (!(times[j] < times[j + 1]))
      throw DataError("cumulative hazard: jump times must increase");
  CumulativeHazardEstimate out;
  out.times = std::move(times);
  out.increments = std::move(increments);
  out.cumulative.resize(out.increments.size());
  double run = 0.0;
  for (Eigen::Index j = 0; j < out.increments.size(); ++j) {
    run += out.increments[j];
    out.cumulative[j] = run;
  }
  return out;
}

double CumulativeHazardEstimate::value_at(double t) const {
  // index of last jump time <= t
  const double* begin = times.data();
  const double* end = begin + times.size();
  const auto idx = std::upper_bound(begin, end, t) - begin;
  return idx == 0 ? 0.0 : cumulative[idx - 1];
}

double CumulativeHazardEstimate::increment_sum(double a, double b) const {
  return value_at(b) - value_at(a);
}

NelsonAalenEstimate nelson_aalen(const SurvivalDataset& ds) {
  const RiskSetCounts counts = risk_set_counts(ds);
  const Eigen::Index m = counts.times.size();
  Eigen::VectorXd dh(m), dh1(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    dh[j] = static_cast<double>(counts.deaths[j]) /
            static_cast<double>(counts.at_risk[j]);
    dh1[j] = counts.times[j] * dh[j];
  }
  NelsonAalenEstimate out;
  out.h = make_cumhaz(counts.times, dh);
  out.h1 = make_cumhaz(counts.times, dh1);
  return out;
}

}  // namespace tvemi
