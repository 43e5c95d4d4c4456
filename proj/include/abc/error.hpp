#pragma once

#include <stdexcept>
#include <string>

namespace abc {

/// Root of the engine's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model graph: cycles, dangling references, bad shapes.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// A forward simulation could not produce a valid dataset for one task.
/// Samplers treat this as a rejected attempt and retry.
class SimulationError : public Error {
 public:
  using Error::Error;
};

/// Input arrays do not have the shape an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Linear-algebra failure (non-factorizable covariance, zero denominators).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An inference run cannot continue.
class SamplerError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace abc
