#pragma once

#include <stdexcept>
#include <string>

namespace tvemi {

// Error taxonomy, mirrored by CLI exit codes:
//   ConfigError -> 1 (usage / schema), DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// Newton/IRLS failed to reach the stated tolerances within the iteration cap.
struct ConvergenceError : NumericError {
  using NumericError::NumericError;
};

// Observed information (or a posterior covariance sub-block) is numerically
// singular: reciprocal condition below threshold.
struct SingularError : NumericError {
  using NumericError::NumericError;
};

// Monotone partial likelihood: a coefficient ran away past the divergence bound.
struct DivergenceError : NumericError {
  using NumericError::NumericError;
};

// Complete separation in a logistic imputation model.
struct SeparationError : NumericError {
  using NumericError::NumericError;
};

}  // namespace tvemi
