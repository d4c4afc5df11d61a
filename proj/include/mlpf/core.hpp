#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mlpf {

/// Largest state/observation dimension supported by the inline-storage vector types.
inline constexpr int kMaxDim = 4;

/// Dynamically sized vector with inline storage; never touches the heap.
template <typename Scalar>
using SmallVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

template <typename Scalar>
using SmallMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using StateVector = SmallVector<double>;
using ObsVector = SmallVector<double>;
using DiffusionMatrix = SmallMatrix<double>;

/// Step size of level l: 2^-l.
inline double step_size(int level) { return std::ldexp(1.0, -level); }

/// Number of Euler steps per unit interval at level l.
inline long steps_per_unit(int level) { return 1L << level; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Requested a discretization finer than the stored data.
class FrequencyExceeded : public Error {
 public:
  using Error::Error;
};

class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

/// Configuration validation failure; `field` is a dotted path into the config document.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace mlpf
