#pragma once

#include <stdexcept>
#include <string>

namespace lcbf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (dimension mismatch, bad index).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Numerical integration produced a non-finite state.
class IntegrationBlowup : public Error {
 public:
  using Error::Error;
};

/// A region or grid has no usable allowable points.
class DegenerateRegion : public Error {
 public:
  using Error::Error;
};

/// Convex hull input is too small, collinear, or has zero-length edges.
class DegenerateHull : public Error {
 public:
  using Error::Error;
};

/// An optimization routine failed numerically (as opposed to proving
/// infeasibility).
class SolverFailure : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcbf
