#pragma once

#include <array>

#include <json.hpp>

#include "hzdrom/types.hpp"

namespace hzdrom {

enum LinkIndex : int {
  kStanceShin = 0,
  kStanceThigh = 1,
  kTorso = 2,
  kSwingThigh = 3,
  kSwingShin = 4,
};

struct LinkParams {
  double mass = 0.0;        // kg
  double length = 0.0;      // m
  double com_offset = 0.0;  // m, measured from the hip-side joint of the link
  double inertia = 0.0;     // kg m^2 about the link COM
};

/// Kinematic and inertial description of the pinned five-link walker.
///
/// Every point of interest is written as a sum of unit vectors
/// e(theta_j) = (sin theta_j, cos theta_j) along the absolute link angles
/// theta = S q, with x the walking direction and z up. The coefficient
/// vectors are precomputed here; the dynamics functions only combine them.
class RobotModel {
 public:
  RobotModel(const std::array<LinkParams, 5>& links, double gravity);

  /// Torso 10 kg / 0.5 m, thighs and shins 5 kg / 0.4 m, midpoint COMs,
  /// slender-rod inertias.
  static RobotModel default_biped();

  static RobotModel from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const LinkParams& link(int i) const { return links_[i]; }
  const std::array<LinkParams, 5>& links() const { return links_; }
  double gravity() const { return gravity_; }
  double total_mass() const { return total_mass_; }
  double shin_length() const { return links_[kStanceShin].length; }
  double thigh_length() const { return links_[kStanceThigh].length; }
  double leg_length() const { return shin_length() + thigh_length(); }

  /// theta = S q (lower triangular ones).
  const Mat5& angle_map() const { return angle_map_; }
  /// Coefficients of link i's COM in the e(theta_j) basis.
  const Vec5& com_coeffs(int i) const { return com_coeffs_[i]; }
  /// W = sum_i m_i a_i a_i^T over COM coefficient vectors.
  const Mat5& mass_weights() const { return mass_weights_; }
  /// w = sum_i m_i a_i.
  const Vec5& gravity_weights() const { return gravity_weights_; }

  // Point coefficients in the e(theta_j) basis.
  Vec5 stance_knee_coeffs() const;
  Vec5 hip_coeffs() const;
  Vec5 torso_tip_coeffs() const;
  Vec5 swing_knee_coeffs() const;
  Vec5 swing_foot_coeffs() const;
  Vec5 com_total_coeffs() const { return gravity_weights_ / total_mass_; }

 private:
  std::array<LinkParams, 5> links_;
  double gravity_;
  double total_mass_ = 0.0;
  Mat5 angle_map_;
  std::array<Vec5, 5> com_coeffs_;
  Mat5 mass_weights_;
  Vec5 gravity_weights_;
};

struct Keypoints {
  Vec2 pivot;
  Vec2 stance_knee;
  Vec2 hip;
  Vec2 torso_tip;
  Vec2 swing_knee;
  Vec2 swing_foot;
  Vec2 com;
};

struct Energies {
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

Vec5 link_angles(const RobotModel& model, const Vec5& q);

/// Position of the point sum_j coeffs_j e(theta_j).
Vec2 point_position(const RobotModel& model, const Vec5& coeffs, const Vec5& q);
/// d(point)/dq, a 2x5 matrix.
Mat25 point_jacobian(const RobotModel& model, const Vec5& coeffs, const Vec5& q);
/// d/dt(J) qd for the same point.
Vec2 point_jacobian_dot_qd(const RobotModel& model, const Vec5& coeffs, const Vec5& q, const Vec5& qd);

Keypoints fk(const RobotModel& model, const Vec5& q);
Mat25 swing_foot_jacobian(const RobotModel& model, const Vec5& q);
Mat25 com_jacobian(const RobotModel& model, const Vec5& q);

Mat5 mass_matrix(const RobotModel& model, const Vec5& q);
/// dD/dq_k for k = 0..4.
std::array<Mat5, 5> mass_matrix_partials(const RobotModel& model, const Vec5& q);
/// C(q, qd) from the Christoffel symbols of D.
Mat5 coriolis_matrix(const RobotModel& model, const Vec5& q, const Vec5& qd);
/// grad U(q).
Vec5 gravity_vector(const RobotModel& model, const Vec5& q);
/// H = C qd + grad U.
Vec5 bias_vector(const RobotModel& model, const Vec5& q, const Vec5& qd);

double potential_energy(const RobotModel& model, const Vec5& q);
Energies energies(const RobotModel& model, const Vec5& q, const Vec5& qd);

/// B = [0_{1x4}; I_4].
Mat54 actuation_matrix();

/// qdd = D^{-1}(B u - H).
Vec5 forward_dynamics(const RobotModel& model, const FomState& x, const Vec4& u);

}  // namespace hzdrom
