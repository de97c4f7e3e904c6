#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rescbf {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// One robot per column: an m x n matrix of positions.
template <typename Scalar>
using PointSet = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vecd = Vec<double>;
using PointSetd = PointSet<double>;

// Raised when an exhaustive computation would exceed its configured size cap.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for invalid configuration; `field` names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Non-finite state encountered while integrating.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace rescbf
