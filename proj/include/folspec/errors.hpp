#pragma once

// Exception hierarchy shared by all modules.  Every condition a caller can
// recover from gets its own type; message text carries the offending values.

#include <stdexcept>
#include <string>

namespace folspec {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// models
struct DegenerateSpan : Error {
  using Error::Error;
};
struct MixedRationality : Error {
  using Error::Error;
};
struct NonPositiveMetric : Error {
  using Error::Error;
};
struct TransverseLeafDependence : Error {
  using Error::Error;
};

// operators
struct SingularWeight : Error {
  using Error::Error;
};

// spectra
struct BudgetExceeded : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct UnsupportedTail : Error {
  using Error::Error;
};

// adiabatic
struct InsufficientData : Error {
  using Error::Error;
};

// cli
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace folspec
