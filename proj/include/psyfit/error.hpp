#pragma once

#include <stdexcept>
#include <string>

namespace psyfit {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration (missing key, unknown option, subject without scores).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed input data: parse failures, schema violations, broken bundle files, alignment misses.
class DataError : public Error {
public:
  using Error::Error;
};

/// Violated numeric preconditions (non-finite values, empty fits, degenerate abscissae).
class NumericalError : public Error {
public:
  using Error::Error;
};

} // namespace psyfit
