#include "hzdrom/controller.hpp"

#include <cmath>
#include <limits>

namespace hzdrom {

void ControllerConfig::validate() const {
  if (!((kp.array() >= 0.0).all() && (kd.array() >= 0.0).all()) || !kp.allFinite() || !kd.allFinite()) {
    throw ConfigError("controller gains must be non-negative");
  }
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in (0, 1]");
  if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
}

double StepController::commanded_step(const FomState&, double, const StepContext&) const {
  return std::numeric_limits<double>::quiet_NaN();
}

FomState StepController::project(const FomState&, double, const StepContext&) const {
  throw std::logic_error("controller has no zero-dynamics manifold");
}

Vec8 StepController::manifold_residual(const FomState&, double, const StepContext&) const {
  throw std::logic_error("controller has no zero-dynamics manifold");
}

StepContext PassiveController::begin_step(const FomState&) const { return {}; }

// ---------------------------------------------------------------------------

ZeroDynamicsController::ZeroDynamicsController(Embedding embedding, ControllerConfig config)
    : embedding_(std::move(embedding)), config_(config) {
  config_.validate();
}

StepContext ZeroDynamicsController::begin_step(const FomState& x_plus) const {
  return embedding_.make_context(x_plus);
}

double ZeroDynamicsController::phase(const FomState& x, double s, const StepContext& ctx) const {
  return embedding_.tau(x.q(0), s, ctx);
}

double ZeroDynamicsController::replan_interval() const {
  const EmbeddingConfig& c = embedding_.config();
  return c.replan == ReplanMode::Replan ? c.replan_interval : 0.0;
}

void ZeroDynamicsController::replan(StepContext& ctx, const FomState& x, double s) const {
  const Vec2 z = phi_z(embedding_.model(), x);
  embedding_.replan(ctx, z, embedding_.tau(z(0), s, ctx));
}

std::vector<double> ZeroDynamicsController::breakpoints(const StepContext&) const {
  if (embedding_.config().phase == PhaseMode::Time) return {embedding_.params().t_ssp};
  return {};
}

double ZeroDynamicsController::commanded_step(const FomState& x, double s, const StepContext& ctx) const {
  return embedding_.targets(phi_z(embedding_.model(), x), s, ctx).step_command;
}

FomState ZeroDynamicsController::project(const FomState& x, double s, const StepContext& ctx) const {
  return embedding_.lift(phi_z(embedding_.model(), x), s, ctx);
}

Vec8 ZeroDynamicsController::manifold_residual(const FomState& x, double s, const StepContext& ctx) const {
  const ManifoldPoint mp = embedding_.psi(phi_z(embedding_.model(), x), s, ctx);
  Vec8 h;
  h << x.q.tail<4>() - mp.psi1, x.qd.tail<4>() - mp.psi2;
  return h;
}

OutputState ZeroDynamicsController::outputs(const FomState& x, double s, const StepContext& ctx) const {
  const Vec2 z = phi_z(embedding_.model(), x);
  const ManifoldPoint mp = embedding_.psi(z, s, ctx);
  const double omega2 = momentum_rate(embedding_.model(), x.q);
  OutputState out;
  out.y = x.q.tail<4>() - mp.psi1;
  out.ydot = x.qd.tail<4>() - (mp.dpsi1_dz1 * x.qd(0) + mp.dpsi1_dz2 * omega2 + mp.dpsi1_ds);
  return out;
}

namespace {

// d/dt f(t) at t = 0, where the phase along the perturbation is
// tau0 + dtau * t. The targets are only C1 where tau crosses 0 or 1, so
// the stencil is kept on one side of those crossings.
template <class F>
Vec4 phase_rate(F f, double tau0, double dtau, double h) {
  bool behind = false;
  bool ahead = false;
  for (double k : {0.0, 1.0}) {
    if (dtau == 0.0) break;
    const double t = (k - tau0) / dtau;
    if (std::abs(t) < 2.0 * h) (t > 0.0 ? ahead : behind) = true;
  }
  if (behind && !ahead) return (-3.0 * f(0.0) + 4.0 * f(h) - f(2.0 * h)) / (2.0 * h);
  if (ahead && !behind) return (3.0 * f(0.0) - 4.0 * f(-h) + f(-2.0 * h)) / (2.0 * h);
  return (f(h) - f(-h)) / (2.0 * h);
}

}  // namespace

void ZeroDynamicsController::output_dynamics(const FomState& x, double s, const StepContext& ctx, Mat4& a,
                                             Vec4& b) const {
  const RobotModel& model = embedding_.model();
  const Mat5 d = mass_matrix(model, x.q);
  const Eigen::LLT<Mat5> llt(d);
  const Mat54 dinv_b = llt.solve(actuation_matrix());
  const Vec2 z = phi_z(model, x);
  const ManifoldPoint mp = embedding_.psi(z, s, ctx);
  a = dinv_b.bottomRows<4>() - mp.dpsi1_dz1 * dinv_b.row(0);

  // Drift: derivative of ydot along the unforced vector field.
  const Vec5 qdd0 = llt.solve(-bias_vector(model, x.q, x.qd));
  const double h = config_.fd_step;
  const double tau0 = embedding_.tau_raw(x.q(0), s, ctx);
  const double dtau = embedding_.tau_raw(x.q(0) + x.qd(0), s + 1.0, ctx) - tau0;
  b = phase_rate([&](double dt) { return outputs(FomState{x.q + dt * x.qd, x.qd + dt * qdd0}, s + dt, ctx).ydot; },
                 tau0, dtau, h);
}

Vec4 ZeroDynamicsController::psi2_rate(const FomState& x, double s, const StepContext& ctx) const {
  const Vec2 z = phi_z(embedding_.model(), x);
  const Vec2 zdot(x.qd(0), momentum_rate(embedding_.model(), x.q));
  const double tau0 = embedding_.tau_raw(z(0), s, ctx);
  const double dtau = embedding_.tau_raw(z(0) + zdot(0), s + 1.0, ctx) - tau0;
  return phase_rate([&](double dt) { return Vec4(embedding_.psi(z + dt * zdot, s + dt, ctx).psi2); }, tau0, dtau,
                    config_.fd_step);
}

Vec4 ZeroDynamicsController::invariance_control(const FomState& x, double s, const StepContext& ctx) const {
  const RobotModel& model = embedding_.model();
  const Mat5 d = mass_matrix(model, x.q);
  const Eigen::LLT<Mat5> llt(d);
  const Mat54 dinv_b = llt.solve(actuation_matrix());
  const Vec5 dinv_h = llt.solve(bias_vector(model, x.q, x.qd));
  const Mat4 bt_dinv_b = dinv_b.bottomRows<4>();
  return bt_dinv_b.partialPivLu().solve(dinv_h.tail<4>() + psi2_rate(x, s, ctx));
}

Vec4 ZeroDynamicsController::io_control(const FomState& x, double s, const StepContext& ctx) const {
  Mat4 a;
  Vec4 b;
  output_dynamics(x, s, ctx, a, b);
  const OutputState o = outputs(x, s, ctx);
  const double eps = config_.epsilon;
  const Vec4 v = -(config_.kp / (eps * eps)).cwiseProduct(o.y) - (config_.kd / eps).cwiseProduct(o.ydot);
  const Eigen::FullPivLU<Mat4> lu(a);
  if (!lu.isInvertible() || lu.rcond() < 1e-12) throw SimulationError("decoupling matrix is ill-conditioned");
  return lu.solve(v - b);
}

Vec4 ZeroDynamicsController::pd_control(const FomState& x, double s, const StepContext& ctx) const {
  const Vec8 h = manifold_residual(x, s, ctx);
  const double eps = config_.epsilon;
  return -(config_.kp / (eps * eps)).cwiseProduct(h.head<4>()) - (config_.kd / eps).cwiseProduct(h.tail<4>());
}

Vec4 ZeroDynamicsController::control(const FomState& x, double s, const StepContext& ctx) const {
  switch (config_.mode) {
    case ControlMode::Invariance:
      return invariance_control(x, s, ctx);
    case ControlMode::IoLinearization:
      return io_control(x, s, ctx);
    case ControlMode::Pd:
      break;
  }
  return pd_control(x, s, ctx);
}

}  // namespace hzdrom
