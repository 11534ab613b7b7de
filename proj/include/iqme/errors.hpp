#ifndef IQME_ERRORS_HPP
#define IQME_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace iqme {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix fails the density-matrix or tangent-operator invariants.
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a formula (pure state for HM, |r| > 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Model parameters that cannot describe a valid generator.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Steady state of a model interpretation lies outside the Bloch ball.
class UnphysicalInterpretationError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

/// Metric has no closed-form geodesic distance.
class UnsupportedMetricError : public Error {
 public:
  using Error::Error;
};

/// Integration left the Bloch ball.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqme

#endif  // IQME_ERRORS_HPP
