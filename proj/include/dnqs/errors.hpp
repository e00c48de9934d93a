#pragma once

#include <stdexcept>
#include <string>

namespace dnqs {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// non-finite or out-of-domain argument
struct InvalidInputError : Error {
  using Error::Error;
};

// incompatible vector/matrix dimensions
struct ShapeError : Error {
  using Error::Error;
};

// inconsistent run configuration (bad depth, bad key, missing file)
struct ConfigError : Error {
  using Error::Error;
};

// request exceeds what the implementation is willing to enumerate
struct ResourceError : Error {
  using Error::Error;
};

// least-squares fit could not be performed; carries the exclusion count
struct FitError : Error {
  int excluded_points = 0;
  FitError(const std::string& msg, int excluded) : Error(msg), excluded_points(excluded) {}
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dnqs
