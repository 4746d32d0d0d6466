#pragma once

#include <string>

#include "hzdrom/hlip.hpp"
#include "hzdrom/model.hpp"
#include "hzdrom/types.hpp"

namespace hzdrom {

/// Actuated/unactuated split of the state: eta = (q_a, qd_a),
/// z = (q_1, (D qd)_1). z(1) is the angular momentum about the pivot.
struct EtaZ {
  Vec4 eta1 = Vec4::Zero();
  Vec4 eta2 = Vec4::Zero();
  Vec2 z = Vec2::Zero();
};

EtaZ phi(const RobotModel& model, const FomState& x);
FomState phi_inv(const RobotModel& model, const EtaZ& ez);
/// Just the unactuated part of phi.
Vec2 phi_z(const RobotModel& model, const FomState& x);
/// dz2/dt = -dU/dq1, independent of the input.
double momentum_rate(const RobotModel& model, const Vec5& q);

/// How the HLIP position maps to the stance-shin angle.
enum class IkBase {
  TwoLink,     ///< exact stance-leg IK placing the hip at (p, z0), knee forward
  VirtualLeg,  ///< q1 = atan2(p, z0), the shin taken as the pivot-to-hip leg
};

/// Chart between HLIP states r = (p, v) and unactuated coordinates
/// z = (q1, m z0 v). The stance leg is solved for a hip at (p, hip_height);
/// hip_height defaults to the pendulum height z0.
class XiMap {
 public:
  /// com_offset is the horizontal COM position relative to the hip, so the
  /// hip sits at p - com_offset when the ROM mass is at p.
  XiMap(const HlipParams& params, double shin_length, double thigh_length, IkBase base = IkBase::TwoLink,
        double hip_height = 0.0, double com_offset = 0.0);

  Vec2 forward(const Vec2& r) const;
  Vec2 inverse(const Vec2& z) const;
  /// d r / d z at z.
  Mat2 inverse_jacobian(const Vec2& z) const;

  double stance_angle(double p) const;
  double stance_angle_slope(double p) const;

  /// Open interval of positions on which the chart is a diffeomorphism.
  double p_min() const { return p_min_; }
  double p_max() const { return p_max_; }
  const HlipParams& params() const { return params_; }
  IkBase base() const { return base_; }
  double hip_height() const { return height_; }
  double com_offset() const { return offset_; }

 private:
  double position_from_angle(double z1) const;
  // Same maps in terms of the hip position.
  double leg_angle(double hip_x) const;
  double leg_angle_slope(double hip_x) const;

  HlipParams params_;
  double height_;
  double offset_;
  double shin_;
  double thigh_;
  IkBase base_;
  double p_min_;
  double p_max_;
};

enum class PhaseMode { State, Time };
enum class ReplanMode { OpenLoop, Replan };

struct EmbeddingConfig {
  double hip_height = 0.7;    // p_z^d [m]
  double torso_angle = 0.0;   // theta^d [rad], absolute, forward positive
  double swing_apex = 0.07;   // h_sw [m]
  /// Weight of the parabolic term in the swing-height bump; the rest is a
  /// tangential quartic. Sets the touchdown descent rate to 4 w h_sw / T.
  double landing_weight = 0.3;
  PhaseMode phase = PhaseMode::Time;
  ReplanMode replan = ReplanMode::Replan;
  /// 0 replans continuously, otherwise the prediction is sampled and held.
  double replan_interval = 0.0;
  IkBase ik_base = IkBase::TwoLink;
  double com_offset = 0.0;  // horizontal COM minus hip [m], see XiMap

  void validate(double leg_length) const;
};

/// Per-step data fixed at impact and updated at replan ticks.
struct StepContext {
  Vec2 z_plus = Vec2::Zero();
  double swing_x_plus = 0.0;
  /// ROM-predicted pre-impact z1 (state phase only).
  double z1_pred_minus = 0.0;
  /// Held prediction source for open-loop and sampled replanning.
  Vec2 z_ref = Vec2::Zero();
  double horizon_ref = 0.0;
};

/// Desired task values and their partials with respect to (z1, z2, s).
struct TaskTargets {
  Vec4 value = Vec4::Zero();
  Vec4 d_z1 = Vec4::Zero();
  Vec4 d_z2 = Vec4::Zero();
  Vec4 d_s = Vec4::Zero();
  double tau = 0.0;
  double step_command = 0.0;
};

struct IkResult {
  Vec4 qa = Vec4::Zero();
  double residual = 0.0;
  int iterations = 0;
  double condition = 1.0;
  bool near_singular = false;
};

/// psi(z) together with the first-order data needed by the controllers.
struct ManifoldPoint {
  Vec4 psi1 = Vec4::Zero();
  Vec4 psi2 = Vec4::Zero();
  Vec4 dpsi1_dz1 = Vec4::Zero();
  Vec4 dpsi1_dz2 = Vec4::Zero();
  Vec4 dpsi1_ds = Vec4::Zero();
  TaskTargets targets;
  IkResult ik;
};

inline constexpr double kIkTolerance = 1e-8;
inline constexpr int kIkMaxIterations = 50;
inline constexpr double kSingularCondition = 1e8;

/// Encodes the HLIP step-to-step behavior as a zero-dynamics manifold
/// {eta = psi(z)} of the biped.
///
/// Tasks, in order: hip height, absolute torso angle, swing-foot x and
/// swing-foot z relative to the stance pivot. psi1(z) solves the tasks for
/// q2..q5 at q1 = z1; psi2(z) is the matching actuated velocity, solved
/// together with the momentum constraint z2 = (D qd)_1 so that it depends on
/// z only.
class Embedding {
 public:
  Embedding(RobotModel model, HlipParams params, StepPolicy policy, EmbeddingConfig config);

  const RobotModel& model() const { return model_; }
  const HlipParams& params() const { return params_; }
  const StepPolicy& policy() const { return policy_; }
  const EmbeddingConfig& config() const { return config_; }
  const XiMap& xi() const { return xi_; }

  StepContext make_context(const FomState& x_plus) const;
  /// Context for the step that ends at the ROM fixed point.
  StepContext nominal_context() const;
  /// Refresh the held prediction source at phase tau.
  void replan(StepContext& ctx, const Vec2& z, double tau) const;

  double tau_raw(double z1, double s, const StepContext& ctx) const;
  double tau(double z1, double s, const StepContext& ctx) const;

  /// ell* + K (flow(Xi^-1(z_ref), horizon) - r*).
  double kappa(const Vec2& z_ref, double horizon) const;

  TaskTargets targets(const Vec2& z, double s, const StepContext& ctx) const;

  Vec4 task(const Vec5& q) const;
  Mat45 task_jacobian(const Vec5& q) const;

  /// Closed-form solution of the tasks on the knee-forward branch; used to
  /// seed the Newton iteration.
  Vec4 analytic_seed(double q1, const Vec4& target) const;
  /// Damped Newton on the four task equations for q2..q5 at fixed q1.
  IkResult solve_ik(double q1, const Vec4& target, const Vec4& seed) const;

  ManifoldPoint psi(const Vec2& z, double s, const StepContext& ctx) const;

  /// iota(z) = Phi^{-1}(psi(z), z).
  FomState lift(const Vec2& z, double s, const StepContext& ctx) const;

  /// Pre-impact state on the manifold at the ROM fixed point, z* = Xi(r*).
  FomState nominal_pre_impact() const;
  FomState pre_impact_from_z(const Vec2& z) const;

 private:
  double swing_height(double tau_raw) const;
  double swing_height_slope(double tau_raw) const;

  RobotModel model_;
  HlipParams params_;
  StepPolicy policy_;
  EmbeddingConfig config_;
  XiMap xi_;
};

}  // namespace hzdrom
