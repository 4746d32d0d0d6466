#pragma once

#include <vector>

#include "hzdrom/embedding.hpp"

namespace hzdrom {

enum class ControlMode { Invariance, IoLinearization, Pd };

struct ControllerConfig {
  ControlMode mode = ControlMode::Pd;
  Vec4 kp = Vec4::Constant(400.0);
  Vec4 kd = Vec4::Constant(40.0);
  /// Convergence-rate scaling: gains become kp / eps^2 and kd / eps.
  double epsilon = 1.0;
  /// Step for the finite-difference time derivatives of psi.
  double fd_step = 1e-6;

  void validate() const;
};

/// Feedback used during one continuous phase. A context is created from the
/// post-impact state and may be refreshed at replan ticks.
class StepController {
 public:
  virtual ~StepController() = default;

  virtual StepContext begin_step(const FomState& x_plus) const = 0;
  virtual Vec4 control(const FomState& x, double s, const StepContext& ctx) const = 0;
  /// Normalized phase used to gate the touchdown guard.
  virtual double phase(const FomState& x, double s, const StepContext& ctx) const = 0;

  /// Period of sample-and-hold replanning, 0 if none.
  virtual double replan_interval() const { return 0.0; }
  virtual void replan(StepContext&, const FomState&, double) const {}
  /// Times within a step where the closed-loop vector field has a kink.
  virtual std::vector<double> breakpoints(const StepContext&) const { return {}; }
  /// Step length currently commanded, NaN if the controller has no plan.
  virtual double commanded_step(const FomState&, double, const StepContext&) const;

  /// Manifold projection and residual; controllers without a manifold report
  /// has_manifold() == false and throw from these.
  virtual bool has_manifold() const { return false; }
  virtual FomState project(const FomState& x, double s, const StepContext& ctx) const;
  virtual Vec8 manifold_residual(const FomState& x, double s, const StepContext& ctx) const;
};

/// u = 0; phase is s normalized by a nominal duration.
class PassiveController final : public StepController {
 public:
  explicit PassiveController(double nominal_duration = 0.3) : duration_(nominal_duration) {}

  StepContext begin_step(const FomState& x_plus) const override;
  Vec4 control(const FomState&, double, const StepContext&) const override { return Vec4::Zero(); }
  double phase(const FomState&, double s, const StepContext&) const override { return s / duration_; }

 private:
  double duration_;
};

/// Output y = eta1 - psi1(z) and its time derivative along the true dynamics.
struct OutputState {
  Vec4 y = Vec4::Zero();
  Vec4 ydot = Vec4::Zero();
};

/// Drives the biped onto the zero-dynamics manifold built from the HLIP.
class ZeroDynamicsController final : public StepController {
 public:
  ZeroDynamicsController(Embedding embedding, ControllerConfig config);

  const Embedding& embedding() const { return embedding_; }
  const ControllerConfig& config() const { return config_; }

  StepContext begin_step(const FomState& x_plus) const override;
  Vec4 control(const FomState& x, double s, const StepContext& ctx) const override;
  double phase(const FomState& x, double s, const StepContext& ctx) const override;
  double replan_interval() const override;
  void replan(StepContext& ctx, const FomState& x, double s) const override;
  std::vector<double> breakpoints(const StepContext& ctx) const override;
  double commanded_step(const FomState& x, double s, const StepContext& ctx) const override;

  bool has_manifold() const override { return true; }
  FomState project(const FomState& x, double s, const StepContext& ctx) const override;
  /// (eta1 - psi1(z), eta2 - psi2(z)).
  Vec8 manifold_residual(const FomState& x, double s, const StepContext& ctx) const override;

  OutputState outputs(const FomState& x, double s, const StepContext& ctx) const;
  /// Decoupling matrix A and drift b with ydd = A u + b.
  void output_dynamics(const FomState& x, double s, const StepContext& ctx, Mat4& a, Vec4& b) const;
  /// d/dt psi2(z, s) along the unactuated dynamics of x.
  Vec4 psi2_rate(const FomState& x, double s, const StepContext& ctx) const;

 private:
  Vec4 invariance_control(const FomState& x, double s, const StepContext& ctx) const;
  Vec4 io_control(const FomState& x, double s, const StepContext& ctx) const;
  Vec4 pd_control(const FomState& x, double s, const StepContext& ctx) const;

  Embedding embedding_;
  ControllerConfig config_;
};

}  // namespace hzdrom
