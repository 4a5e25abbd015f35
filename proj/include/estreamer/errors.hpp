#pragma once

#include <stdexcept>
#include <string>

namespace estreamer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of a function (negative rate, zero duration, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A caller-side precondition was violated, e.g. asking for the fitting-regime
/// power of a burst that overflows the client buffer.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Profile, cost-table or scenario configuration is incomplete or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Simulation input scheduled out of order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

/// Malformed feedback stream (ACK regression and the like).
class FeedError : public Error {
 public:
  using Error::Error;
};

/// Wire-format violation in the media HTTP extension.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace estreamer
