#pragma once

#include <stdexcept>
#include <string>

namespace mveb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an operation's arguments does not hold (shape mismatch,
/// zero vector, empty batch, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A configuration record failed validation. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed (factorization breakdown, non-finite loss).
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

inline void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace detail
}  // namespace mveb
