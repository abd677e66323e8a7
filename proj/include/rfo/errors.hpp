#pragma once

#include <stdexcept>
#include <string>

namespace rfo {

// Base class for every error raised by this library. Catching rfo::Error at a
// tool boundary is enough to map any failure onto a diagnostic + exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed call: dimension mismatch, non-finite entries, bad enum value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Spectral radius of the state matrix is not strictly inside the unit circle.
class UnstableSystem : public Error {
 public:
  using Error::Error;
};

// A matrix required to be (semi)definite has an eigenvalue below tolerance.
class NotPositiveSemiDefinite : public Error {
 public:
  using Error::Error;
};

// An input is degenerate for the requested operation (e.g. u = 0 where the
// worst-case maximizer direction is undefined).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// The optimum itself is degenerate: no finite regularizer reproduces it.
class DegenerateOptimum : public Error {
 public:
  using Error::Error;
};

// An iterative routine hit its cap; message carries the last residual.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// The problem instance has no (unique) solution: singular system, empty set.
class IllPosed : public Error {
 public:
  using Error::Error;
};

// A regression/fit does not have full column rank.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

// A graph input is not the tree the model requires.
class InvalidTopology : public Error {
 public:
  using Error::Error;
};

// The contraction-based tracking bound does not apply (step size too large,
// gain matrix not a contraction).
class BoundInapplicable : public Error {
 public:
  using Error::Error;
};

// A configuration document fails schema validation; the message names the
// offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rfo
