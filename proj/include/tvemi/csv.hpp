#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tvemi/mi_approx.hpp"
#include "tvemi/sim.hpp"
#include "tvemi/survival.hpp"

namespace tvemi {

// %.17g, NaN rendered as NA; export -> ingest round-trips bit-exactly
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

struct CsvOverrides {
  std::vector<std::string> binary;      // force these columns binary
  std::vector<std::string> continuous;  // force these columns continuous
};

// Header row required. Columns `time` and `event` are mandatory, `id` is
// optional, every other column is a covariate. Missing cells are empty or the
// literal NA. Kinds are inferred (observed values all in {0,1} => binary)
// unless overridden.
SurvivalDataset parse_dataset_csv(std::istream& in,
                                  const CsvOverrides& overrides = {});
SurvivalDataset read_dataset_csv(const std::string& path,
                                 const CsvOverrides& overrides = {});

std::string dataset_csv(const SurvivalDataset& ds);
void write_dataset_csv(const SurvivalDataset& ds, const std::string& path);

// Long format: an `imp` column (1..M) ahead of the dataset columns; all
// cells filled with that imputation's values.
std::string imputations_csv(const ImputedDatasets& imputed);
void write_imputations_csv(const ImputedDatasets& imputed,
                           const std::string& path);

// One row per method x metric x (covariate, time); columns
// method,metric,covariate,time,value,mcse.
std::string summary_csv(const PerformanceReport& report);

// One row per method x covariate x grid point; columns
// method,covariate,t,mean,q025,q50,q975,truth.
std::string curves_csv(const PerformanceReport& report);

}  // namespace tvemi
