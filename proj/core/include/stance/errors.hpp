#pragma once

#include <stdexcept>
#include <string>

namespace stance {

// Base class for every error raised by this library. Subtypes map onto the
// CLI exit-code policy: ConfigError -> 2, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input record (bad JSON, missing or mistyped field).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Referential or structural invariant broken: orphan parent ids, cycles,
// labels on unknown utterances, inconsistent annotation batches.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration or usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Precondition breach in a numeric operation (shape mismatch, non-finite
// input, empty span).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A statistic whose value is undefined for the given input, e.g. kappa over
// an empty retained set.
class UndefinedStatistic : public Error {
 public:
  using Error::Error;
};

// Transport failure that survived the retry policy.
class NetworkError : public Error {
 public:
  using Error::Error;
};

// Rejected credentials; never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

}  // namespace stance
