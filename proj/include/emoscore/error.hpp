#pragma once

#include <stdexcept>
#include <string>

namespace emoscore {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read, or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed container: bad magic, unsupported version, unparsable text.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Payload size disagrees with the declared shape.
class LengthError : public Error {
 public:
  using Error::Error;
};

// Domain invariant violated: non-finite value, label out of range,
// duplicate id, shape mismatch.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Problem in a key/value configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace emoscore
