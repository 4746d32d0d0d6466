#pragma once

#include <string>
#include <vector>

#include "hzdrom/controller.hpp"
#include "hzdrom/model.hpp"

namespace hzdrom {

struct Guard {
  double clearance = 0.0;  // m
  double tau_min = 0.5;
  double margin = 0.02;    // m, swing foot must land this far ahead of the pivot

  void validate() const;
};

struct IntegratorOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double max_dt = 0.01;
  double initial_dt = 1e-4;
  /// > 0 switches to classic RK4 with this step.
  double fixed_dt = 0.0;
  double t_max = 2.0;
  double state_bound = 1e3;
  /// Event time is refined until |guard| falls below this.
  double event_tol = 1e-13;
  /// Fall detection: hip below this height, or torso tilted past this angle.
  double min_hip_height = 0.3;
  double max_torso_tilt = 1.2;
  /// Keep every accepted sample; otherwise only the endpoints.
  bool record = true;

  void validate() const;
};

struct StepTrace {
  std::vector<double> times;
  std::vector<FomState> states;
  std::vector<Vec4> controls;
  FomState x_plus;
  FomState x_minus;
  double duration = 0.0;
  /// Context as it stood at the impact (after any replan updates).
  StepContext context;
};

/// Swing-foot height.
double guard_value(const RobotModel& model, const FomState& x);
/// d/dt of the swing-foot height.
double guard_rate(const RobotModel& model, const FomState& x);

/// Swing and stance legs swap roles; q1 becomes the old swing-shin angle.
/// Applied to q and qd alike.
Mat5 relabel_matrix();
Vec5 relabel(const Vec5& v);

struct ImpactResult {
  FomState x_plus;
  Vec2 impulse;  // ground impulse at the new pivot [N s]
};

/// Plastic impact of the swing foot followed by relabeling.
ImpactResult impact(const RobotModel& model, const FomState& x_minus);
FomState impact_map(const RobotModel& model, const FomState& x_minus);

/// Integrates one continuous phase from a post-impact state until touchdown.
StepTrace integrate_step(const RobotModel& model, const StepController& controller, const FomState& x_plus,
                         const Guard& guard = {}, const IntegratorOptions& opts = {});

/// P(x) = flow to the guard from impact(x).
FomState poincare(const RobotModel& model, const StepController& controller, const FomState& x_minus,
                  const Guard& guard = {}, const IntegratorOptions& opts = {});

struct StepRecord {
  int index = 0;
  double t_start = 0.0;
  double duration = 0.0;
  /// Swing-foot x relative to the pivot at touchdown.
  double step_length = 0.0;
  double commanded_step = 0.0;
  Vec2 z_plus = Vec2::Zero();
  Vec2 z_minus = Vec2::Zero();
  FomState x_plus;
  FomState x_minus;
  /// |Delta_eta(psi(z-), z-) - psi(Delta_z(psi(z-), z-))| at the impact that
  /// ends this step, NaN without a manifold.
  double invariance_residual = 0.0;
};

struct WalkTrace {
  FomState initial;
  std::vector<StepTrace> steps;
  std::vector<StepRecord> records;
  bool completed = true;
  std::string failure;

  /// Pre-impact states x_0, x_1, ... (initial state first).
  std::vector<FomState> pre_impact_states() const;
  FomState final_state() const;
};

/// Chains n Poincare iterations from x0 on the section. Simulation failures
/// stop the walk and are reported in the trace rather than thrown.
WalkTrace simulate_walk(const RobotModel& model, const StepController& controller, const FomState& x0, int n_steps,
                        const Guard& guard = {}, const IntegratorOptions& opts = {});

/// Discrete-invariance residual at a pre-impact state.
double discrete_invariance_residual(const RobotModel& model, const StepController& controller,
                                    const FomState& x_minus, double s, const StepContext& ctx);

}  // namespace hzdrom
