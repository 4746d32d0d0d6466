#include "hzdrom/hybrid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/numeric/odeint.hpp>

#include "hzdrom/embedding.hpp"

namespace hzdrom {

namespace ode = boost::numeric::odeint;

namespace {

using OdeState = std::array<double, 10>;

OdeState to_ode(const FomState& x) {
  OdeState y;
  for (int i = 0; i < 5; ++i) {
    y[i] = x.q(i);
    y[5 + i] = x.qd(i);
  }
  return y;
}

FomState from_ode(const OdeState& y) {
  FomState x;
  for (int i = 0; i < 5; ++i) {
    x.q(i) = y[i];
    x.qd(i) = y[5 + i];
  }
  return x;
}

struct ClosedLoop {
  const RobotModel& model;
  const StepController& controller;
  const StepContext& ctx;

  void operator()(const OdeState& y, OdeState& dy, double s) const {
    const FomState x = from_ode(y);
    const Vec5 qdd = forward_dynamics(model, x, controller.control(x, s, ctx));
    for (int i = 0; i < 5; ++i) {
      dy[i] = y[5 + i];
      dy[5 + i] = qdd(i);
    }
  }
};

void check_state(const RobotModel& model, const FomState& x, double s, const IntegratorOptions& opts) {
  if (!x.finite() || x.stacked().norm() > opts.state_bound) {
    throw Divergence("state left the bound at s = " + std::to_string(s));
  }
  const Keypoints k = fk(model, x.q);
  const double torso = x.q(0) + x.q(1) + x.q(2);
  if (k.hip(1) < opts.min_hip_height || std::abs(torso) > opts.max_torso_tilt) {
    throw FallOrStall("robot fell at s = " + std::to_string(s));
  }
}

bool guard_armed(const RobotModel& model, const StepController& controller, const StepContext& ctx,
                 const Guard& guard, const FomState& x, double s) {
  return fk(model, x.q).swing_foot(0) > guard.margin && guard_rate(model, x) < 0.0 &&
         controller.phase(x, s, ctx) >= guard.tau_min;
}

// One integrator step from (y0, dy0) at s0 with size h, reproducible for any h.
class Stepper {
 public:
  explicit Stepper(const IntegratorOptions& opts) : opts_(opts) {}

  template <class Sys>
  OdeState single(Sys& sys, const OdeState& y0, const OdeState& dy0, double s0, double h) {
    OdeState out;
    if (opts_.fixed_dt > 0.0) {
      rk4_.do_step(sys, y0, dy0, s0, out, h);
    } else {
      OdeState dy_out;
      dopri_.do_step(sys, y0, dy0, s0, out, dy_out, h);
    }
    return out;
  }

 private:
  const IntegratorOptions& opts_;
  ode::runge_kutta4<OdeState> rk4_;
  ode::runge_kutta_dopri5<OdeState> dopri_;
};

}  // namespace

void Guard::validate() const {
  if (!(clearance >= 0.0 && tau_min >= 0.0 && tau_min < 1.0)) {
    throw ConfigError("guard clearance must be non-negative with tau_min in [0, 1)");
  }
  // A negative margin admits touchdown slightly behind the stance foot.
  if (!std::isfinite(margin)) throw ConfigError("guard margin must be finite");
}

void IntegratorOptions::validate() const {
  if (!(rel_tol > 0.0 && abs_tol > 0.0 && max_dt > 0.0 && initial_dt > 0.0 && t_max > 0.0 &&
        state_bound > 0.0 && event_tol > 0.0 && fixed_dt >= 0.0)) {
    throw ConfigError("integrator tolerances and limits must be positive");
  }
}

double guard_value(const RobotModel& model, const FomState& x) { return fk(model, x.q).swing_foot(1); }

double guard_rate(const RobotModel& model, const FomState& x) {
  return swing_foot_jacobian(model, x.q).row(1).dot(x.qd);
}

Mat5 relabel_matrix() {
  Mat5 r = Mat5::Zero();
  r.row(0).setOnes();
  r(1, 4) = -1.0;
  r(2, 3) = -1.0;
  r(3, 2) = -1.0;
  r(4, 1) = -1.0;
  return r;
}

Vec5 relabel(const Vec5& v) { return relabel_matrix() * v; }

// The pinned model cannot release its pivot, so the impact is solved on the
// model extended by the pivot position; that keeps the angular momentum about
// the touchdown point conserved.
ImpactResult impact(const RobotModel& model, const FomState& x_minus) {
  const Vec5& q = x_minus.q;
  const double m = model.total_mass();
  const Mat5 d = mass_matrix(model, q);
  const Mat25 j_com = com_jacobian(model, q);
  const Mat25 j_foot = swing_foot_jacobian(model, q);

  Eigen::Matrix<double, 9, 9> kkt = Eigen::Matrix<double, 9, 9>::Zero();
  kkt.topLeftCorner<5, 5>() = d;
  kkt.block<5, 2>(0, 5) = m * j_com.transpose();
  kkt.block<2, 5>(5, 0) = m * j_com;
  kkt.block<2, 2>(5, 5) = m * Mat2::Identity();
  Eigen::Matrix<double, 2, 7> e;
  e << j_foot, Mat2::Identity();
  kkt.block<7, 2>(0, 7) = -e.transpose();
  kkt.block<2, 7>(7, 0) = e;

  Eigen::Matrix<double, 9, 1> rhs = Eigen::Matrix<double, 9, 1>::Zero();
  rhs.head<5>() = d * x_minus.qd;
  rhs.segment<2>(5) = m * j_com * x_minus.qd;

  const Eigen::FullPivLU<Eigen::Matrix<double, 9, 9>> lu(kkt);
  if (!lu.isInvertible()) throw ImpactError("impact system is singular");
  const Eigen::Matrix<double, 9, 1> sol = lu.solve(rhs);
  if (!sol.allFinite()) throw ImpactError("impact system produced non-finite velocities");

  ImpactResult out;
  out.x_plus.q = relabel(q);
  out.x_plus.qd = relabel(sol.head<5>());
  out.impulse = sol.tail<2>();
  return out;
}

FomState impact_map(const RobotModel& model, const FomState& x_minus) { return impact(model, x_minus).x_plus; }

StepTrace integrate_step(const RobotModel& model, const StepController& controller, const FomState& x_plus,
                         const Guard& guard, const IntegratorOptions& opts) {
  guard.validate();
  opts.validate();
  StepTrace trace;
  trace.x_plus = x_plus;
  try {
    StepContext ctx = controller.begin_step(x_plus);
    ClosedLoop sys{model, controller, ctx};
    Stepper single(opts);
    auto controlled = ode::make_controlled(opts.abs_tol, opts.rel_tol, opts.max_dt,
                                           ode::runge_kutta_dopri5<OdeState>());
    const bool fixed = opts.fixed_dt > 0.0;

    std::vector<double> boundaries = controller.breakpoints(ctx);
    const double interval = controller.replan_interval();
    std::sort(boundaries.begin(), boundaries.end());
    size_t next_break = 0;
    double next_tick = interval > 0.0 ? interval : std::numeric_limits<double>::infinity();

    double s = 0.0;
    OdeState y = to_ode(x_plus);
    OdeState dy;
    sys(y, dy, s);
    double g = guard_value(model, x_plus) - guard.clearance;
    double dt = fixed ? opts.fixed_dt : opts.initial_dt;

    auto record = [&](double t, const FomState& x) {
      if (!opts.record) return;
      trace.times.push_back(t);
      trace.states.push_back(x);
      trace.controls.push_back(controller.control(x, t, ctx));
    };
    record(s, x_plus);

    for (int accepted = 0;; ++accepted) {
      if (s > opts.t_max) throw FallOrStall("no touchdown before t_max");
      if (accepted > 20000) throw FallOrStall("integrator stalled");
      while (next_break < boundaries.size() && boundaries[next_break] <= s) ++next_break;
      const double bound = std::min(next_tick, next_break < boundaries.size() ? boundaries[next_break]
                                                                               : std::numeric_limits<double>::infinity());
      double h = fixed ? opts.fixed_dt : dt;
      bool hits_bound = false;
      if (s + h >= bound) {
        h = bound - s;
        hits_bound = true;
      }

      OdeState y1;
      OdeState dy1;
      double s1 = s;
      if (fixed) {
        y1 = single.single(sys, y, dy, s, h);
        s1 = hits_bound ? bound : s + h;
      } else {
        double h_try = h;
        int attempts = 0;
        while (controlled.try_step(sys, y, dy, s1, y1, dy1, h_try) != ode::success) {
          if (++attempts > 200 || h_try < 1e-12) throw FallOrStall("integrator step size underflow");
          hits_bound = false;
        }
        if (hits_bound) {
          s1 = bound;
        } else {
          dt = h_try;
        }
      }
      const FomState x1 = from_ode(y1);
      check_state(model, x1, s1, opts);
      const double g1 = guard_value(model, x1) - guard.clearance;

      if (g > 0.0 && g1 <= 0.0 && guard_armed(model, controller, ctx, guard, x1, s1)) {
        // Illinois iteration on the step size from the last accepted state.
        double a = 0.0, fa = g, b = s1 - s, fb = g1;
        OdeState yb = y1;
        int side = 0;
        for (int it = 0; it < 200 && std::abs(fb) > opts.event_tol && b - a > 1e-15; ++it) {
          double c = b - fb * (b - a) / (fb - fa);
          if (!(c > a && c < b)) c = 0.5 * (a + b);
          const OdeState yc = single.single(sys, y, dy, s, c);
          const double fc = guard_value(model, from_ode(yc)) - guard.clearance;
          if (fc > 0.0) {
            a = c;
            fa = fc;
            if (side == -1) fb *= 0.5;
            side = -1;
          } else {
            b = c;
            fb = fc;
            yb = yc;
            if (side == 1) fa *= 0.5;
            side = 1;
          }
        }
        trace.x_minus = from_ode(yb);
        trace.duration = s + b;
        record(trace.duration, trace.x_minus);
        if (!opts.record) {
          trace.times = {0.0, trace.duration};
          trace.states = {x_plus, trace.x_minus};
        }
        trace.context = ctx;
        return trace;
      }

      y = y1;
      s = s1;
      g = g1;
      record(s, x1);
      if (hits_bound) {
        if (s >= next_tick) {
          controller.replan(ctx, x1, s);
          next_tick += interval;
        }
        sys(y, dy, s);
      } else if (fixed) {
        sys(y, dy, s);
      } else {
        dy = dy1;
      }
    }
  } catch (const IkFailure& e) {
    throw FallOrStall(std::string("manifold left the IK domain: ") + e.what());
  } catch (const OutOfChart& e) {
    throw FallOrStall(std::string("state left the ROM chart: ") + e.what());
  }
}

FomState poincare(const RobotModel& model, const StepController& controller, const FomState& x_minus,
                  const Guard& guard, const IntegratorOptions& opts) {
  IntegratorOptions quiet = opts;
  quiet.record = false;
  return integrate_step(model, controller, impact_map(model, x_minus), guard, quiet).x_minus;
}

double discrete_invariance_residual(const RobotModel& model, const StepController& controller,
                                    const FomState& x_minus, double s, const StepContext& ctx) {
  const FomState on_manifold = controller.project(x_minus, s, ctx);
  const FomState after = impact_map(model, on_manifold);
  const StepContext next = controller.begin_step(after);
  return controller.manifold_residual(after, 0.0, next).norm();
}

std::vector<FomState> WalkTrace::pre_impact_states() const {
  std::vector<FomState> out{initial};
  for (const auto& r : records) out.push_back(r.x_minus);
  return out;
}

FomState WalkTrace::final_state() const { return records.empty() ? initial : records.back().x_minus; }

WalkTrace simulate_walk(const RobotModel& model, const StepController& controller, const FomState& x0, int n_steps,
                        const Guard& guard, const IntegratorOptions& opts) {
  if (n_steps < 0) throw ConfigError("n_steps must be non-negative");
  WalkTrace walk;
  walk.initial = x0;
  FomState x = x0;
  double t = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    StepTrace st;
    try {
      st = integrate_step(model, controller, impact_map(model, x), guard, opts);
    } catch (const SimulationError& e) {
      walk.completed = false;
      walk.failure = e.what();
      break;
    } catch (const OutOfChart& e) {
      walk.completed = false;
      walk.failure = e.what();
      break;
    }
    StepRecord rec;
    rec.index = k;
    rec.t_start = t;
    rec.duration = st.duration;
    rec.step_length = fk(model, st.x_minus.q).swing_foot(0);
    rec.x_plus = st.x_plus;
    rec.x_minus = st.x_minus;
    rec.z_plus = phi_z(model, st.x_plus);
    rec.z_minus = phi_z(model, st.x_minus);
    rec.commanded_step = std::numeric_limits<double>::quiet_NaN();
    rec.invariance_residual = std::numeric_limits<double>::quiet_NaN();
    if (controller.has_manifold()) {
      try {
        rec.commanded_step = controller.commanded_step(st.x_minus, st.duration, st.context);
        rec.invariance_residual =
            discrete_invariance_residual(model, controller, st.x_minus, st.duration, st.context);
      } catch (const SimulationError&) {
      } catch (const OutOfChart&) {
      }
    }
    walk.records.push_back(rec);
    walk.steps.push_back(std::move(st));
    x = walk.records.back().x_minus;
    t += rec.duration;
  }
  return walk;
}

}  // namespace hzdrom
