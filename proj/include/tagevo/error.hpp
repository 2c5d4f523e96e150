#pragma once

#include <stdexcept>
#include <string>

namespace tagevo {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or unreadable input data (files, streams, caches).
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Not enough data for the requested statistic (too few weeks, no edges, ...).
class InsufficientData : public Error {
 public:
  using Error::Error;
};

// A precondition or internal invariant was violated.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace tagevo
