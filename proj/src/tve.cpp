#include "tvemi/tve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "tvemi/errors.hpp"
#include "tvemi/stats.hpp"

namespace tvemi {

namespace {

void require_increasing(const std::vector<double>& v, const char* what) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    if (!(v[i] < v[i + 1]))
      throw ConfigError(std::string(what) + " must be strictly increasing");
}

}  // namespace

TveSpec TveSpec::constant() { return TveSpec(Form::Constant, {}); }

TveSpec TveSpec::linear() { return TveSpec(Form::Linear, {}); }

TveSpec TveSpec::rcs(std::vector<double> knots) {
  if (knots.size() < 3)
    throw ConfigError("rcs spec needs at least 3 knots");
  require_increasing(knots, "rcs knots");
  return TveSpec(Form::Rcs, std::move(knots));
}

TveSpec TveSpec::step(std::vector<double> cutpoints) {
  if (cutpoints.empty()) throw ConfigError("step spec needs at least 1 cutpoint");
  if (cutpoints.front() <= 0.0)
    throw ConfigError("step cutpoints must be positive");
  require_increasing(cutpoints, "step cutpoints");
  return TveSpec(Form::Step, std::move(cutpoints));
}

int TveSpec::dimension() const {
  switch (form_) {
    case Form::Constant: return 1;
    case Form::Linear: return 2;
    case Form::Rcs: return static_cast<int>(knots_.size());
    case Form::Step: return static_cast<int>(knots_.size());
  }
  return 0;
}

void basis_into(const TveSpec& spec, double t, Eigen::Ref<Eigen::VectorXd> out) {
  switch (spec.form()) {
    case TveSpec::Form::Constant:
      out[0] = 1.0;
      return;
    case TveSpec::Form::Linear:
      out[0] = 1.0;
      out[1] = t;
      return;
    case TveSpec::Form::Rcs: {
      out[0] = 1.0;
      out[1] = t;
      const int n_terms = spec.dimension() - 2;
      for (int i = 0; i < n_terms; ++i)
        out[2 + i] = rcs_term(t, spec.knots(), i);
      return;
    }
    case TveSpec::Form::Step: {
      // one-hot over [0, s1], (s1, s2], ..., with t > s_K in the last interval
      const auto& cuts = spec.knots();
      out.setZero();
      int k = 0;
      while (k + 1 < static_cast<int>(cuts.size()) && t > cuts[k]) ++k;
      if (t > cuts[k]) k = static_cast<int>(cuts.size()) - 1;
      out[k] = 1.0;
      return;
    }
  }
}

Eigen::VectorXd basis(const TveSpec& spec, double t) {
  Eigen::VectorXd out(spec.dimension());
  basis_into(spec, t, out);
  return out;
}

double tve_eval(const TveSpec& spec, const Eigen::VectorXd& coeffs, double t) {
  if (coeffs.size() != spec.dimension())
    throw ConfigError("coefficient length does not match spec dimension");
  return basis(spec, t).dot(coeffs);
}

std::vector<double> select_knots(const std::vector<double>& times, int n_knots) {
  static const std::vector<std::vector<double>> percentiles = {
      {0.10, 0.50, 0.90},
      {0.05, 0.35, 0.65, 0.95},
      {0.05, 0.25, 0.50, 0.75, 0.95},
  };
  if (n_knots < 3 || n_knots > 5)
    throw ConfigError("knot selection supports 3 to 5 knots");
  if (times.empty()) throw DataError("knot selection needs event times");

  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n_distinct =
      std::set<double>(sorted.begin(), sorted.end()).size();
  if (n_distinct < static_cast<std::size_t>(n_knots))
    throw DataError("fewer distinct event times than requested knots");

  std::vector<double> knots;
  for (double p : percentiles[n_knots - 3])
    knots.push_back(quantile_type7(sorted, p));
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    if (!(knots[i] < knots[i + 1]))
      throw DataError("degenerate knots: event times too concentrated");
  return knots;
}

std::string to_string(const TveSpec& spec) {
  auto join = [](const std::vector<double>& v) {
    std::string s;
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", v[i]);
      if (i) s += ',';
      s += buf;
    }
    return s;
  };
  switch (spec.form()) {
    case TveSpec::Form::Constant: return "constant";
    case TveSpec::Form::Linear: return "linear";
    case TveSpec::Form::Rcs: return "rcs:" + join(spec.knots());
    case TveSpec::Form::Step: return "step:" + join(spec.knots());
  }
  return {};
}

TveSpec parse_tve_spec(const std::string& text) {
  if (text == "constant") return TveSpec::constant();
  if (text == "linear") return TveSpec::linear();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    std::vector<double> values;
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        throw ConfigError("bad number in tve spec: " + item);
      }
      if (used != item.size())
        throw ConfigError("bad number in tve spec: " + item);
      values.push_back(v);
    }
    if (head == "rcs") return TveSpec::rcs(std::move(values));
    if (head == "step") return TveSpec::step(std::move(values));
  }
  throw ConfigError("unrecognized tve spec: " + text);
}

}  // namespace tvemi
