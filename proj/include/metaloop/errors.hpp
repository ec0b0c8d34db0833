#pragma once

#include <stdexcept>
#include <string>

namespace metaloop {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (bad ranges, missing files, missing mappings).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Text that violates an expected format: meta replies, trace files, benchmark records.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Network / connection failures talking to a backend.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A backend request exceeded its deadline.
class TimeoutError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Session lifecycle misuse (e.g. injecting into a terminated session).
class SessionError : public Error {
 public:
  using Error::Error;
};

/// File system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace metaloop
