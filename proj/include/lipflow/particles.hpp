#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace lipflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class Role { source, target, generated };

std::string_view to_string(Role role) noexcept;

/// M x d particle positions, one particle per row.
struct ParticleSet {
  Matrix positions;
  Role role = Role::source;
  std::uint64_t seed = 0;

  Eigen::Index size() const noexcept { return positions.rows(); }
  Eigen::Index dim() const noexcept { return positions.cols(); }
  bool all_finite() const noexcept { return positions.allFinite(); }
};

/// Raised when a caller violates an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on file-format or I/O failures.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace lipflow
