#include "hzdrom/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include <Eigen/SVD>

namespace hzdrom {

namespace {

Vec2 unit(double theta) { return Vec2(std::sin(theta), std::cos(theta)); }

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

// Quintic blend with zero slope and curvature at both ends.
double blend(double t) { return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t); }
double blend_slope(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }

}  // namespace

EtaZ phi(const RobotModel& model, const FomState& x) {
  EtaZ out;
  out.eta1 = x.q.tail<4>();
  out.eta2 = x.qd.tail<4>();
  out.z = phi_z(model, x);
  return out;
}

Vec2 phi_z(const RobotModel& model, const FomState& x) {
  const Mat5 d = mass_matrix(model, x.q);
  return Vec2(x.q(0), d.row(0).dot(x.qd));
}

FomState phi_inv(const RobotModel& model, const EtaZ& ez) {
  FomState x;
  x.q << ez.z(0), ez.eta1;
  const Mat5 d = mass_matrix(model, x.q);
  const double qd1 = (ez.z(1) - d.row(0).tail<4>().dot(ez.eta2)) / d(0, 0);
  x.qd << qd1, ez.eta2;
  return x;
}

double momentum_rate(const RobotModel& model, const Vec5& q) { return -gravity_vector(model, q)(0); }

// ---------------------------------------------------------------------------

XiMap::XiMap(const HlipParams& params, double shin_length, double thigh_length, IkBase base, double hip_height,
             double com_offset)
    : params_(params),
      height_(hip_height > 0.0 ? hip_height : params.z0),
      offset_(com_offset),
      shin_(shin_length),
      thigh_(thigh_length),
      base_(base) {
  params_.validate();
  if (base_ == IkBase::VirtualLeg) {
    p_min_ = -std::numeric_limits<double>::infinity();
    p_max_ = std::numeric_limits<double>::infinity();
    return;
  }
  const double z0 = height_;
  if (!(z0 < shin_ + thigh_) || !(z0 > std::abs(shin_ - thigh_))) {
    throw ConfigError("hip height is not reachable by the stance leg");
  }
  const double reach = std::sqrt((shin_ + thigh_) * (shin_ + thigh_) - z0 * z0);
  if (!(leg_angle_slope(0.0) > 0.0)) throw ConfigError("stance-leg chart is degenerate at p = 0");
  p_min_ = -reach * (1.0 - 1e-9);
  // The fold is where the stance thigh passes vertical; locate it numerically
  // so the same code covers asymmetric leg segments.
  const int n = 4000;
  double lo = 0.0;
  double hi = reach * (1.0 - 1e-9);
  for (int i = 1; i <= n; ++i) {
    const double p = hi * i / n;
    if (leg_angle_slope(p) <= 0.0) {
      hi = p;
      lo = hi * (i - 1) / n;
      for (int k = 0; k < 200 && hi - lo > 1e-15; ++k) {
        const double mid = 0.5 * (lo + hi);
        (leg_angle_slope(mid) > 0.0 ? lo : hi) = mid;
      }
      hi = lo;
      break;
    }
  }
  p_min_ += offset_;
  p_max_ = hi + offset_;
}

double XiMap::stance_angle(double p) const { return leg_angle(p - offset_); }

double XiMap::stance_angle_slope(double p) const { return leg_angle_slope(p - offset_); }

double XiMap::leg_angle(double p) const {
  const double z0 = height_;
  if (base_ == IkBase::VirtualLeg) return std::atan2(p, z0);
  const double len = std::hypot(p, z0);
  const double cos_a = clamp_unit((shin_ * shin_ + len * len - thigh_ * thigh_) / (2.0 * shin_ * len));
  return std::atan2(p, z0) + std::acos(cos_a);
}

double XiMap::leg_angle_slope(double p) const {
  const double z0 = height_;
  const double len2 = p * p + z0 * z0;
  if (base_ == IkBase::VirtualLeg) return z0 / len2;
  const double len = std::sqrt(len2);
  const double cos_a = (shin_ * shin_ + len2 - thigh_ * thigh_) / (2.0 * shin_ * len);
  const double sin_a = std::sqrt(std::max(0.0, 1.0 - cos_a * cos_a));
  if (sin_a == 0.0) return std::numeric_limits<double>::infinity();
  const double dcos_dlen = (len2 - shin_ * shin_ + thigh_ * thigh_) / (2.0 * shin_ * len2);
  return z0 / len2 - dcos_dlen / sin_a * (p / len);
}

Vec2 XiMap::forward(const Vec2& r) const {
  if (!(r(0) > p_min_ && r(0) < p_max_)) throw OutOfChart("HLIP position outside the stance-leg chart");
  return Vec2(stance_angle(r(0)), params_.mass * params_.z0 * r(1));
}

double XiMap::position_from_angle(double z1) const {
  if (base_ == IkBase::VirtualLeg) {
    if (!(std::abs(z1) < 0.5 * M_PI)) throw OutOfChart("stance angle outside the virtual-leg chart");
    return height_ * std::tan(z1) + offset_;
  }
  double lo = p_min_;
  double hi = p_max_;
  if (!(z1 > stance_angle(lo) && z1 < stance_angle(hi))) {
    throw OutOfChart("stance angle outside the stance-leg chart");
  }
  // Newton safeguarded by the bracket; the angle is increasing on the chart.
  double p = std::clamp(height_ * std::tan(z1 - leg_angle(0.0)) + offset_, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double f = stance_angle(p) - z1;
    if (f == 0.0) return p;
    (f > 0.0 ? hi : lo) = p;
    double next = p - f / stance_angle_slope(p);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - p) <= 1e-16 * (1.0 + std::abs(p))) return next;
    p = next;
  }
  return p;
}

Vec2 XiMap::inverse(const Vec2& z) const {
  return Vec2(position_from_angle(z(0)), z(1) / (params_.mass * params_.z0));
}

Mat2 XiMap::inverse_jacobian(const Vec2& z) const {
  const double p = position_from_angle(z(0));
  Mat2 j = Mat2::Zero();
  j(0, 0) = 1.0 / stance_angle_slope(p);
  j(1, 1) = 1.0 / (params_.mass * params_.z0);
  return j;
}

// ---------------------------------------------------------------------------

void EmbeddingConfig::validate(double leg_length) const {
  if (!(hip_height > 0.0 && hip_height < leg_length)) throw ConfigError("hip_height must lie in (0, leg length)");
  if (!std::isfinite(torso_angle) || std::abs(torso_angle) >= 0.5 * M_PI) throw ConfigError("torso_angle out of range");
  if (!(swing_apex >= 0.0)) throw ConfigError("swing_apex must be non-negative");
  if (!(landing_weight >= 0.0 && landing_weight <= 1.0)) throw ConfigError("landing_weight must lie in [0, 1]");
  if (!(replan_interval >= 0.0)) throw ConfigError("replan_interval must be non-negative");
  if (!(std::abs(com_offset) < leg_length)) throw ConfigError("com_offset must be smaller than the leg length");
}

Embedding::Embedding(RobotModel model, HlipParams params, StepPolicy policy, EmbeddingConfig config)
    : model_(std::move(model)),
      params_(params),
      policy_(policy),
      config_(config),
      xi_(params, model_.shin_length(), model_.thigh_length(), config.ik_base, config.hip_height, config.com_offset) {
  config_.validate(model_.leg_length());
}

StepContext Embedding::make_context(const FomState& x_plus) const {
  StepContext ctx;
  ctx.z_plus = phi_z(model_, x_plus);
  ctx.swing_x_plus = fk(model_, x_plus.q).swing_foot(0);
  ctx.z_ref = ctx.z_plus;
  ctx.horizon_ref = params_.t_ssp;
  if (config_.phase == PhaseMode::State) {
    const Vec2 r_minus = ssp_flow(params_, xi_.inverse(ctx.z_plus), params_.t_ssp);
    ctx.z1_pred_minus = xi_.forward(r_minus)(0);
  }
  return ctx;
}

StepContext Embedding::nominal_context() const {
  StepContext ctx;
  const Vec2 r_plus = policy_.r_star - Vec2(policy_.ell_star, 0.0);
  ctx.z_plus = xi_.forward(r_plus);
  ctx.swing_x_plus = -policy_.ell_star;
  ctx.z1_pred_minus = xi_.forward(policy_.r_star)(0);
  ctx.z_ref = ctx.z_plus;
  ctx.horizon_ref = params_.t_ssp;
  return ctx;
}

void Embedding::replan(StepContext& ctx, const Vec2& z, double tau) const {
  ctx.z_ref = z;
  ctx.horizon_ref = std::max(0.0, 1.0 - tau) * params_.t_ssp;
}

double Embedding::tau_raw(double z1, double s, const StepContext& ctx) const {
  if (config_.phase == PhaseMode::Time) return s / params_.t_ssp;
  const double span = ctx.z1_pred_minus - ctx.z_plus(0);
  if (std::abs(span) < 1e-6) throw SimulationError("state-based phase is degenerate for this step");
  return (z1 - ctx.z_plus(0)) / span;
}

double Embedding::tau(double z1, double s, const StepContext& ctx) const {
  return std::clamp(tau_raw(z1, s, ctx), 0.0, 1.0);
}

double Embedding::kappa(const Vec2& z_ref, double horizon) const {
  const Vec2 r_hat = ssp_flow(params_, xi_.inverse(z_ref), std::max(0.0, horizon));
  return policy_.step_length(r_hat);
}

double Embedding::swing_height(double t) const {
  const double h = config_.swing_apex;
  const double w = config_.landing_weight;
  // Linear continuation on both sides keeps the profile C1 at the ends.
  if (t <= 0.0) return 4.0 * w * h * t;
  if (t >= 1.0) return -4.0 * w * h * (t - 1.0);
  const double a = t * (1.0 - t);
  return h * (w * 4.0 * a + (1.0 - w) * 16.0 * a * a);
}

double Embedding::swing_height_slope(double t) const {
  const double h = config_.swing_apex;
  const double w = config_.landing_weight;
  if (t <= 0.0) return 4.0 * w * h;
  if (t >= 1.0) return -4.0 * w * h;
  const double a = t * (1.0 - t);
  return h * (1.0 - 2.0 * t) * (w * 4.0 + (1.0 - w) * 32.0 * a);
}

TaskTargets Embedding::targets(const Vec2& z, double s, const StepContext& ctx) const {
  const double period = params_.t_ssp;
  TaskTargets out;

  const double tr = tau_raw(z(0), s, ctx);
  double dtr_dz1 = 0.0;
  double dtr_ds = 0.0;
  if (config_.phase == PhaseMode::Time) {
    dtr_ds = 1.0 / period;
  } else {
    dtr_dz1 = 1.0 / (ctx.z1_pred_minus - ctx.z_plus(0));
  }
  const double t = std::clamp(tr, 0.0, 1.0);
  out.tau = t;

  double ell = 0.0;
  double dell_dz1 = 0.0;
  double dell_dz2 = 0.0;
  double dell_ds = 0.0;
  if (config_.replan == ReplanMode::Replan && config_.replan_interval == 0.0) {
    // Past the nominal touchdown the horizon goes negative, which keeps the
    // target smooth for late landings.
    const double horizon = (1.0 - tr) * period;
    const Vec2 r = xi_.inverse(z);
    const Mat2 flow = ssp_flow_matrix(params_, horizon);
    const Vec2 r_hat = flow * r;
    ell = policy_.step_length(r_hat);
    const RowVec2 dell_dz = policy_.gain * flow * xi_.inverse_jacobian(z);
    dell_dz1 = dell_dz(0);
    dell_dz2 = dell_dz(1);
    const double lam2 = params_.lambda() * params_.lambda();
    const Vec2 r_hat_dot(r_hat(1), lam2 * r_hat(0));
    const double dell_dtau = -period * policy_.gain.dot(r_hat_dot);
    dell_dz1 += dell_dtau * dtr_dz1;
    dell_ds += dell_dtau * dtr_ds;
  } else {
    ell = kappa(ctx.z_ref, ctx.horizon_ref);
  }
  out.step_command = ell;

  out.value(0) = config_.hip_height;
  out.value(1) = config_.torso_angle;

  const double x0 = ctx.swing_x_plus;
  const double b = blend(t);
  const double db = blend_slope(t);
  out.value(2) = x0 + (ell - x0) * b;
  out.d_z1(2) = db * (ell - x0) * dtr_dz1 + b * dell_dz1;
  out.d_z2(2) = b * dell_dz2;
  out.d_s(2) = db * (ell - x0) * dtr_ds + b * dell_ds;

  const double dh = swing_height_slope(tr);
  out.value(3) = swing_height(tr);
  out.d_z1(3) = dh * dtr_dz1;
  out.d_s(3) = dh * dtr_ds;
  return out;
}

Vec4 Embedding::task(const Vec5& q) const {
  const Keypoints k = fk(model_, q);
  return Vec4(k.hip(1), q(0) + q(1) + q(2), k.swing_foot(0), k.swing_foot(1));
}

Mat45 Embedding::task_jacobian(const Vec5& q) const {
  Mat45 j;
  j.row(0) = point_jacobian(model_, model_.hip_coeffs(), q).row(1);
  j.row(1) << 1.0, 1.0, 1.0, 0.0, 0.0;
  j.bottomRows<2>() = swing_foot_jacobian(model_, q);
  return j;
}

Vec4 Embedding::analytic_seed(double q1, const Vec4& target) const {
  const double ls = model_.shin_length();
  const double lt = model_.thigh_length();
  const double th1 = q1;
  // Stance thigh leans back on the chart side of the fold.
  const double th2 = -std::acos(clamp_unit((target(0) - ls * std::cos(th1)) / lt));
  const double th3 = target(1);
  const Vec2 hip = ls * unit(th1) + lt * unit(th2);
  const Vec2 foot(target(2), target(3));
  const Vec2 u = hip - foot;
  const double len = std::max(u.norm(), 1e-9);
  const double alpha = std::acos(clamp_unit((ls * ls + len * len - lt * lt) / (2.0 * ls * len)));
  const double th5 = std::atan2(u(0), u(1)) + alpha;
  const Vec2 knee = foot + ls * unit(th5);
  const double th4 = std::atan2(hip(0) - knee(0), hip(1) - knee(1));
  return Vec4(th2 - th1, th3 - th2, th4 - th3, th5 - th4);
}

IkResult Embedding::solve_ik(double q1, const Vec4& target, const Vec4& seed) const {
  IkResult out;
  Vec5 q;
  q << q1, seed;
  Vec4 r = target - task(q);
  double res = r.norm();
  double mu = 1e-9;
  int it = 0;
  for (; it < kIkMaxIterations && res > 1e-14; ++it) {
    const Mat4 ja = task_jacobian(q).rightCols<4>();
    const Mat4 normal = ja.transpose() * ja;
    const Vec4 g = ja.transpose() * r;
    bool improved = false;
    while (mu < 1e6) {
      const Vec4 step = (normal + mu * Mat4::Identity()).ldlt().solve(g);
      Vec5 trial = q;
      trial.tail<4>() += step;
      const Vec4 r_trial = target - task(trial);
      const double res_trial = r_trial.norm();
      if (res_trial < res) {
        q = trial;
        r = r_trial;
        res = res_trial;
        mu = std::max(mu * 0.1, 1e-12);
        improved = true;
        break;
      }
      mu *= 10.0;
    }
    if (!improved) break;
  }
  out.qa = q.tail<4>();
  out.residual = res;
  out.iterations = it;
  const Eigen::JacobiSVD<Mat4> svd(task_jacobian(q).rightCols<4>());
  const auto& sv = svd.singularValues();
  out.condition = sv(3) > 0.0 ? sv(0) / sv(3) : std::numeric_limits<double>::infinity();
  out.near_singular = out.condition > kSingularCondition;
  if (!(res <= kIkTolerance)) {
    std::ostringstream msg;
    msg << "task IK did not converge (residual " << res << " at q1 = " << q1 << ", targets " << target.transpose()
        << ")";
    throw IkFailure(msg.str());
  }
  return out;
}

ManifoldPoint Embedding::psi(const Vec2& z, double s, const StepContext& ctx) const {
  ManifoldPoint out;
  out.targets = targets(z, s, ctx);
  out.ik = solve_ik(z(0), out.targets.value, analytic_seed(z(0), out.targets.value));
  out.psi1 = out.ik.qa;

  Vec5 q;
  q << z(0), out.psi1;
  const Mat45 j = task_jacobian(q);
  const Vec4 ju = j.col(0);
  const Mat4 ja = j.rightCols<4>();
  const Mat5 d = mass_matrix(model_, q);
  const Vec4 d1a = d.row(0).tail<4>().transpose();
  const double d11 = d(0, 0);
  const double omega2 = momentum_rate(model_, q);

  const TaskTargets& tg = out.targets;
  const Vec4 c = ju - tg.d_z1;
  // Task velocity equation with qd1 eliminated through z2 = D11 qd1 + D1a qd_a.
  const Mat4 m = ja - c * d1a.transpose() / d11;
  const Vec4 rhs = -c * z(1) / d11 + tg.d_z2 * omega2 + tg.d_s;
  const Eigen::FullPivLU<Mat4> lu_m(m);
  if (!lu_m.isInvertible()) throw IkFailure("manifold velocity map is singular");
  out.psi2 = lu_m.solve(rhs);

  const Eigen::PartialPivLU<Mat4> lu_a(ja);
  out.dpsi1_dz1 = -lu_a.solve(c);
  out.dpsi1_dz2 = lu_a.solve(tg.d_z2);
  out.dpsi1_ds = lu_a.solve(tg.d_s);
  return out;
}

FomState Embedding::lift(const Vec2& z, double s, const StepContext& ctx) const {
  const ManifoldPoint mp = psi(z, s, ctx);
  return phi_inv(model_, {mp.psi1, mp.psi2, z});
}

FomState Embedding::pre_impact_from_z(const Vec2& z) const {
  const StepContext ctx = nominal_context();
  double s = params_.t_ssp;
  if (config_.phase == PhaseMode::State) s = 0.0;
  return lift(z, s, ctx);
}

FomState Embedding::nominal_pre_impact() const { return pre_impact_from_z(xi_.forward(policy_.r_star)); }

}  // namespace hzdrom
