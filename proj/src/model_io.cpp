#include "tvemi/model_io.hpp"

#include <cstdlib>
#include <map>
#include <sstream>

#include "tvemi/csv.hpp"
#include "tvemi/errors.hpp"

namespace tvemi {

namespace {

void append_vector(std::string& out, const std::string& key,
                   const Eigen::VectorXd& v) {
  out += key;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ' ';
    out += format_double(v[i]);
  }
  out += '\n';
}

void append_matrix(std::string& out, const std::string& key,
                   const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    append_vector(out, key + ' ' + std::to_string(i), m.row(i).transpose());
}

void append_specs(std::string& out, const std::vector<std::string>& names,
                  const std::vector<TveSpec>& specs) {
  out += "covariates " + std::to_string(specs.size()) + '\n';
  for (std::size_t k = 0; k < specs.size(); ++k) {
    out += "name " + std::to_string(k) + ' ' + names[k] + '\n';
    out += "spec " + std::to_string(k) + ' ' + to_string(specs[k]) + '\n';
  }
}

// Parsed view of one file: scalar keys, vector keys, and indexed lines like
// "name 0 x1" / "covariance 2 <numbers>".
struct TextModel {
  std::map<std::string, std::string> scalars;
  std::map<std::string, std::vector<std::string>> indexed;

  static TextModel parse(const std::string& text, const std::string& magic) {
    TextModel tm;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const std::size_t sp = line.find(' ');
      const std::string key = line.substr(0, sp);
      std::string rest =
          sp == std::string::npos ? std::string() : line.substr(sp + 1);
      if (first) {
        if (key != magic)
          throw DataError("model file: expected a '" + magic + "' header");
        first = false;
        continue;
      }
      if (key == "name" || key == "spec" || key == "covariance" ||
          key == "within" || key == "between" || key == "total") {
        const std::size_t sp2 = rest.find(' ');
        if (sp2 == std::string::npos)
          throw DataError("model file: malformed '" + key + "' line");
        const auto index = static_cast<std::size_t>(
            std::strtoul(rest.substr(0, sp2).c_str(), nullptr, 10));
        auto& rows = tm.indexed[key];
        if (rows.size() != index)
          throw DataError("model file: '" + key + "' lines out of order");
        rows.push_back(rest.substr(sp2 + 1));
      } else {
        tm.scalars[key] = rest;
      }
    }
    if (first) throw DataError("model file: empty input");
    return tm;
  }

  const std::string& get(const std::string& key) const {
    const auto it = scalars.find(key);
    if (it == scalars.end())
      throw DataError("model file: missing key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key) const {
    const std::string& s = get(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
      throw DataError("model file: bad value for '" + key + "'");
    return v;
  }

  Eigen::VectorXd vector(const std::string& text,
                         const std::string& key) const {
    std::istringstream in(text);
    std::vector<double> vals;
    std::string token;
    while (in >> token) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0')
        throw DataError("model file: bad number in '" + key + "'");
      vals.push_back(v);
    }
    return Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                             static_cast<Eigen::Index>(vals.size()));
  }

  Eigen::MatrixXd matrix(const std::string& key, Eigen::Index dim) const {
    const auto it = indexed.find(key);
    if (it == indexed.end() ||
        static_cast<Eigen::Index>(it->second.size()) != dim)
      throw DataError("model file: expected " + std::to_string(dim) + " '" +
                      key + "' rows");
    Eigen::MatrixXd m(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const Eigen::VectorXd row = vector(it->second[i], key);
      if (row.size() != dim)
        throw DataError("model file: '" + key + "' row " + std::to_string(i) +
                        " has wrong length");
      m.row(i) = row.transpose();
    }
    return m;
  }

  void names_and_specs(std::vector<std::string>& names,
                       std::vector<TveSpec>& specs) const {
    const auto count = static_cast<std::size_t>(number("covariates"));
    const auto ni = indexed.find("name");
    const auto si = indexed.find("spec");
    if (ni == indexed.end() || ni->second.size() != count ||
        si == indexed.end() || si->second.size() != count)
      throw DataError("model file: needs one name and spec per covariate");
    names = ni->second;
    specs.clear();
    for (const std::string& s : si->second) specs.push_back(parse_tve_spec(s));
  }
};

Eigen::Index total_dimension(const std::vector<TveSpec>& specs) {
  Eigen::Index d = 0;
  for (const auto& s : specs) d += s.dimension();
  return d;
}

}  // namespace

std::string model_to_text(const CoxTveModel& model) {
  std::string out = "tvemi_model 1\n";
  append_specs(out, model.covariate_names, model.specs);
  append_vector(out, "coefficients", model.coefficients);
  append_matrix(out, "covariance", model.covariance);
  out += "log_partial_likelihood " +
         format_double(model.log_partial_likelihood) + '\n';
  out += "n_subjects " + std::to_string(model.n_subjects) + '\n';
  out += "n_events " + std::to_string(model.n_events) + '\n';
  out += "newton_iterations " + std::to_string(model.newton_iterations) + '\n';
  out += "max_abs_score " + format_double(model.max_abs_score) + '\n';
  out += "max_time " + format_double(model.max_time) + '\n';
  out += "t99 " + format_double(model.t99) + '\n';
  return out;
}

CoxTveModel model_from_text(const std::string& text) {
  const TextModel tm = TextModel::parse(text, "tvemi_model");
  CoxTveModel model;
  tm.names_and_specs(model.covariate_names, model.specs);
  model.coefficients = tm.vector(tm.get("coefficients"), "coefficients");
  const Eigen::Index dim = total_dimension(model.specs);
  if (model.coefficients.size() != dim)
    throw DataError("model file: coefficient count does not match the specs");
  model.covariance = tm.matrix("covariance", dim);
  model.log_partial_likelihood = tm.number("log_partial_likelihood");
  model.n_subjects = static_cast<int>(tm.number("n_subjects"));
  model.n_events = static_cast<int>(tm.number("n_events"));
  model.newton_iterations = static_cast<int>(tm.number("newton_iterations"));
  model.max_abs_score = tm.number("max_abs_score");
  model.max_time = tm.number("max_time");
  model.t99 = tm.number("t99");
  return model;
}

std::string pooled_to_text(const PooledFit& fit) {
  std::string out = "tvemi_pooled 1\n";
  append_specs(out, fit.covariate_names, fit.specs);
  out += "m " + std::to_string(fit.pooled.m) + '\n';
  append_vector(out, "q_bar", fit.pooled.q_bar);
  append_matrix(out, "within", fit.pooled.within);
  append_matrix(out, "between", fit.pooled.between);
  append_matrix(out, "total", fit.pooled.total);
  out += "max_time " + format_double(fit.max_time) + '\n';
  out += "t99 " + format_double(fit.t99) + '\n';
  return out;
}

PooledFit pooled_from_text(const std::string& text) {
  const TextModel tm = TextModel::parse(text, "tvemi_pooled");
  PooledFit fit;
  tm.names_and_specs(fit.covariate_names, fit.specs);
  fit.pooled.m = static_cast<int>(tm.number("m"));
  fit.pooled.q_bar = tm.vector(tm.get("q_bar"), "q_bar");
  const Eigen::Index dim = total_dimension(fit.specs);
  if (fit.pooled.q_bar.size() != dim)
    throw DataError("model file: q_bar length does not match the specs");
  fit.pooled.within = tm.matrix("within", dim);
  fit.pooled.between = tm.matrix("between", dim);
  fit.pooled.total = tm.matrix("total", dim);
  fit.max_time = tm.number("max_time");
  fit.t99 = tm.number("t99");
  return fit;
}

}  // namespace tvemi
