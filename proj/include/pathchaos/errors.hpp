#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pathchaos {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class UnboundedKernel : public Error {
 public:
  using Error::Error;
};

class DegenerateDiffusion : public Error {
 public:
  using Error::Error;
};

class TooFewParticles : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

class OraclePdFailure : public Error {
 public:
  OraclePdFailure(const std::string& what, double time) : Error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A non-finite state was produced. step is the index of the first bad state.
class NumericalBlowup : public Error {
 public:
  explicit NumericalBlowup(std::size_t step)
      : Error("non-finite state at step " + std::to_string(step)), step_(step) {}
  NumericalBlowup(std::size_t step, const std::string& context)
      : Error(context + ": non-finite state at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace pathchaos
