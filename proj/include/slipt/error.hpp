#pragma once

#include <stdexcept>
#include <string>

namespace slipt {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (negative
// amplitude, invalid probability, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Link geometry for which the path-loss model is undefined.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: quadrature settings, malformed config documents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical integral failed its normalization or accuracy check.
class ToleranceError : public Error {
 public:
  ToleranceError(const std::string& what, double defect)
      : Error(what), defect_(defect) {}
  double defect() const noexcept { return defect_; }

 private:
  double defect_;
};

// An iterative method ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : Error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

// No input law on the grid meets the constraints. Carries the largest
// achievable average harvested energy as a certificate.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, double max_energy)
      : Error(what), max_energy_(max_energy) {}
  double max_energy() const noexcept { return max_energy_; }

 private:
  double max_energy_;
};

// Multiplier calibration did not reach its moment targets.
class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double power_residual,
                   double energy_residual)
      : Error(what),
        power_residual_(power_residual),
        energy_residual_(energy_residual) {}
  double power_residual() const noexcept { return power_residual_; }
  double energy_residual() const noexcept { return energy_residual_; }

 private:
  double power_residual_;
  double energy_residual_;
};

// Two objects that must share a grid do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace slipt
