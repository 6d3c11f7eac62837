#pragma once

#include <stdexcept>
#include <string>

namespace resp {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data violates a documented invariant (bad box, empty trace, ...).
struct ValidationError : Error {
  using Error::Error;
};

// A file could not be decoded (bad header, malformed row, truncation).
struct ParseError : Error {
  using Error::Error;
};

// Filesystem-level failure (missing file, unwritable path).
struct IoError : Error {
  using Error::Error;
};

// Numeric failure at runtime (divergence, non-finite loss).
struct NumericError : Error {
  using Error::Error;
};

// Caller misuse at the command-line level.
struct UsageError : Error {
  using Error::Error;
};

}  // namespace resp
