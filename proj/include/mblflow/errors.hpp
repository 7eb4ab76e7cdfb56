#pragma once

#include <stdexcept>
#include <string>

namespace mblflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when a dense 2^n x 2^n operator would exceed the configured site cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

/// Eigenvalue pair is degenerate or swaps order inside a finite-difference stencil.
class LevelCrossingError : public Error {
 public:
  using Error::Error;
};

/// A flow step broke orthogonality or drifted the spectrum beyond tolerance.
class FlowError : public Error {
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

}  // namespace mblflow
