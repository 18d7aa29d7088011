#pragma once

#include <stdexcept>
#include <string>

namespace mtdtl {

/// Base exception for every recoverable failure in the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a precondition on shapes, sizes or arguments is violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Raised when an on-disk artifact is missing, malformed or incompatible.
class IoError : public Error {
public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

} // namespace mtdtl
