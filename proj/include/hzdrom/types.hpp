#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hzdrom {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Vec10 = Eigen::Matrix<double, 10, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat10 = Eigen::Matrix<double, 10, 10>;
using Mat25 = Eigen::Matrix<double, 2, 5>;
using Mat45 = Eigen::Matrix<double, 4, 5>;
using Mat54 = Eigen::Matrix<double, 5, 4>;
using RowVec2 = Eigen::RowVector2d;

/// Full-order state of the pinned biped.
///
/// q(0) is the absolute stance-shin angle from vertical, q(1..4) are the
/// stance knee, stance hip, swing hip and swing knee relative angles.
struct FomState {
  Vec5 q = Vec5::Zero();
  Vec5 qd = Vec5::Zero();

  Vec10 stacked() const {
    Vec10 x;
    x << q, qd;
    return x;
  }
  static FomState from_stacked(const Vec10& x) {
    return FomState{x.head<5>(), x.tail<5>()};
  }
  bool finite() const { return q.allFinite() && qd.allFinite(); }
};

/// Thrown for malformed or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base of all failures raised while simulating the hybrid system.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No impact before the time limit, or the robot collapsed.
class FallOrStall : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// State norm exceeded the configured bound.
class Divergence : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// The impact block system could not be solved.
class ImpactError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// Inverse kinematics did not reach the requested residual.
class IkFailure : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

/// A reduced-order state falls outside the domain of the ROM chart.
class OutOfChart : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace hzdrom
