#include "tvemi/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tvemi/errors.hpp"

namespace tvemi {

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read file '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file '" + path + "'");
  out << content;
  if (!out) throw DataError("write to '" + path + "' failed");
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r'))
    --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA"; }

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string cell_context(Eigen::Index row, const std::string& column) {
  return "row " + std::to_string(row + 1) + ", column '" + column + "'";
}

}  // namespace

SurvivalDataset parse_dataset_csv(std::istream& in,
                                  const CsvOverrides& overrides) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    rows.push_back(split_fields(line));
  }
  if (rows.empty()) throw DataError("empty input: a header row is required");

  const std::vector<std::string>& header = rows.front();
  int time_col = -1, event_col = -1, id_col = -1;
  std::vector<int> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name.empty())
      throw DataError("header has an empty column name at position " +
                      std::to_string(c + 1));
    if (std::count(header.begin(), header.end(), name) > 1)
      throw DataError("duplicate column name '" + name + "'");
    if (name == "time")
      time_col = static_cast<int>(c);
    else if (name == "event")
      event_col = static_cast<int>(c);
    else if (name == "id")
      id_col = static_cast<int>(c);
    else
      cov_cols.push_back(static_cast<int>(c));
  }
  if (time_col < 0) throw DataError("missing mandatory column 'time'");
  if (event_col < 0) throw DataError("missing mandatory column 'event'");

  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  if (n == 0) throw DataError("no data rows after the header");
  const auto p = static_cast<Eigen::Index>(cov_cols.size());

  std::vector<std::string> ids(n);
  Eigen::VectorXd time(n);
  Eigen::VectorXi event(n);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, p);
  MaskMatrix observed = MaskMatrix::Constant(n, p, true);

  for (Eigen::Index r = 0; r < n; ++r) {
    const std::vector<std::string>& fields = rows[r + 1];
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(r + 1) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    ids[r] = id_col >= 0 ? fields[id_col] : std::to_string(r + 1);

    double v = 0.0;
    if (!parse_number(fields[time_col], v) || !std::isfinite(v) || v < 0.0)
      throw DataError(cell_context(r, "time") + ": '" + fields[time_col] +
                      "' is not a nonnegative number");
    time[r] = v;
    if (!parse_number(fields[event_col], v) || (v != 0.0 && v != 1.0))
      throw DataError(cell_context(r, "event") + ": '" + fields[event_col] +
                      "' is not 0 or 1");
    event[r] = static_cast<int>(v);

    for (Eigen::Index k = 0; k < p; ++k) {
      const std::string& cell = fields[cov_cols[k]];
      if (is_missing_token(cell)) {
        observed(r, k) = false;
        x(r, k) = std::numeric_limits<double>::quiet_NaN();
      } else if (parse_number(cell, v) && std::isfinite(v)) {
        x(r, k) = v;
      } else {
        throw DataError(cell_context(r, header[cov_cols[k]]) + ": '" + cell +
                        "' is not a number (use NA or an empty cell for "
                        "missing values)");
      }
    }
  }

  std::vector<CovariateInfo> covariates(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    covariates[k].name = header[cov_cols[k]];
    bool binary = true;
    for (Eigen::Index r = 0; r < n && binary; ++r)
      binary = !observed(r, k) || x(r, k) == 0.0 || x(r, k) == 1.0;
    covariates[k].kind = binary ? CovariateKind::Binary
                                : CovariateKind::Continuous;
  }
  const auto apply_override = [&](const std::vector<std::string>& names,
                                  CovariateKind kind) {
    for (const std::string& name : names) {
      bool found = false;
      for (auto& info : covariates)
        if (info.name == name) {
          info.kind = kind;
          found = true;
        }
      if (!found)
        throw ConfigError("kind override names unknown column '" + name + "'");
    }
  };
  apply_override(overrides.binary, CovariateKind::Binary);
  apply_override(overrides.continuous, CovariateKind::Continuous);

  return make_dataset(std::move(ids), std::move(time), std::move(event),
                      std::move(x), std::move(observed), std::move(covariates));
}

SurvivalDataset read_dataset_csv(const std::string& path,
                                 const CsvOverrides& overrides) {
  std::istringstream in(read_text_file(path));
  try {
    return parse_dataset_csv(in, overrides);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

namespace {

void append_row(std::string& out, const SurvivalDataset& ds,
                const Eigen::MatrixXd& values, Eigen::Index i) {
  out += ds.ids[i];
  out += ',';
  out += format_double(ds.time[i]);
  out += ',';
  out += std::to_string(ds.event[i]);
  for (Eigen::Index k = 0; k < values.cols(); ++k) {
    out += ',';
    out += format_double(values(i, k));
  }
  out += '\n';
}

std::string header_line(const SurvivalDataset& ds, bool with_imp) {
  std::string out = with_imp ? "imp,id,time,event" : "id,time,event";
  for (const auto& info : ds.covariates) {
    out += ',';
    out += info.name;
  }
  out += '\n';
  return out;
}

}  // namespace

std::string dataset_csv(const SurvivalDataset& ds) {
  std::string out = header_line(ds, false);
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out += ds.ids[i];
    out += ',';
    out += format_double(ds.time[i]);
    out += ',';
    out += std::to_string(ds.event[i]);
    for (Eigen::Index k = 0; k < ds.p(); ++k) {
      out += ',';
      out += ds.observed(i, k) ? format_double(ds.x(i, k)) : "NA";
    }
    out += '\n';
  }
  return out;
}

void write_dataset_csv(const SurvivalDataset& ds, const std::string& path) {
  write_text_file(path, dataset_csv(ds));
}

std::string imputations_csv(const ImputedDatasets& imputed) {
  const SurvivalDataset& ds = imputed.base;
  std::string out = header_line(ds, true);
  for (int j = 0; j < imputed.m(); ++j) {
    const Eigen::MatrixXd& values = imputed.completed[j];
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      out += std::to_string(j + 1);
      out += ',';
      append_row(out, ds, values, i);
    }
  }
  return out;
}

void write_imputations_csv(const ImputedDatasets& imputed,
                           const std::string& path) {
  write_text_file(path, imputations_csv(imputed));
}

namespace {

std::string study_covariate_name(Eigen::Index k) {
  return "x" + std::to_string(k + 1);
}

void summary_row(std::string& out, const std::string& method,
                 const std::string& metric, const std::string& covariate,
                 const std::string& time, double value, double mcse,
                 bool with_mcse) {
  out += method;
  out += ',';
  out += metric;
  out += ',';
  out += covariate;
  out += ',';
  out += time;
  out += ',';
  out += format_double(value);
  out += ',';
  if (with_mcse) out += format_double(mcse);
  out += '\n';
}

}  // namespace

std::string summary_csv(const PerformanceReport& report) {
  std::string out = "method,metric,covariate,time,value,mcse\n";
  for (const MethodReport& mr : report.methods) {
    const std::string name = to_string(mr.method);
    summary_row(out, name, "reps_used", "", "", mr.n_reps_used, 0, false);
    summary_row(out, name, "reps_failed", "", "", mr.n_reps_failed, 0, false);
    for (Eigen::Index k = 0; k < mr.rejection_pct.size(); ++k)
      summary_row(out, name, "rejection_pct", study_covariate_name(k), "",
                  mr.rejection_pct[k], mr.rejection_mcse[k], true);
    for (Eigen::Index e = 0; e < mr.bias.rows(); ++e) {
      const std::string t = format_double(report.eval_times[e]);
      for (Eigen::Index k = 0; k < mr.bias.cols(); ++k) {
        const std::string cov = study_covariate_name(k);
        summary_row(out, name, "bias", cov, t, mr.bias(e, k),
                    mr.bias_mcse(e, k), true);
        summary_row(out, name, "coverage_pct", cov, t, mr.coverage_pct(e, k),
                    mr.coverage_mcse(e, k), true);
      }
    }
  }
  return out;
}

std::string curves_csv(const PerformanceReport& report) {
  std::string out = "method,covariate,t,mean,q025,q50,q975,truth\n";
  for (const MethodReport& mr : report.methods) {
    const std::string name = to_string(mr.method);
    for (Eigen::Index k = 0; k < mr.mean_curve.cols(); ++k) {
      const std::string cov = study_covariate_name(k);
      for (Eigen::Index i = 0; i < report.grid.size(); ++i) {
        out += name;
        out += ',';
        out += cov;
        out += ',';
        out += format_double(report.grid[i]);
        out += ',';
        out += format_double(mr.mean_curve(i, k));
        out += ',';
        out += format_double(mr.curve_q025(i, k));
        out += ',';
        out += format_double(mr.curve_q50(i, k));
        out += ',';
        out += format_double(mr.curve_q975(i, k));
        out += ',';
        out += format_double(report.true_curve(i, k));
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace tvemi
