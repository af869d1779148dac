#ifndef WBIC_ERRORS_HPP
#define WBIC_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wbic {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad dimensions, bad flags, malformed configs.
struct ConfigError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required. record_index >= 0 when a
// specific dataset record triggered the failure.
struct NumericalError : Error {
  std::int64_t record_index = -1;
  explicit NumericalError(const std::string& msg, std::int64_t record = -1)
      : Error(msg), record_index(record) {}
};

// A caller violated an operation's stated precondition (wrong beta, mixed
// dataset fingerprints, ...).
struct ContractError : Error {
  using Error::Error;
};

// Requested quantity needs information that is not present (e.g. entropy of
// real-world data with no generating truth).
struct UnavailableError : Error {
  using Error::Error;
};

struct UnsupportedError : Error {
  using Error::Error;
};

struct InitError : Error {
  using Error::Error;
};

struct AdaptationError : Error {
  using Error::Error;
};

struct OptimizationError : Error {
  using Error::Error;
};

struct BracketError : Error {
  using Error::Error;
};

struct DegenerateModelError : Error {
  using Error::Error;
};

struct DegenerateRungError : Error {
  int rung = -1;
  DegenerateRungError(const std::string& msg, int which) : Error(msg), rung(which) {}
};

struct DegenerateWeightsError : Error {
  using Error::Error;
};

}  // namespace wbic

#endif
