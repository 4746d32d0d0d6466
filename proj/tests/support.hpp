#pragma once

// Shared fixtures and independent reference computations for the tests.
// The rigid-body oracle below rebuilds the walker geometry joint by joint and
// differentiates it with the complex step, so it shares no code with the
// coefficient-based model.

#include <array>
#include <boost/numeric/odeint.hpp>
#include <complex>
#include <filesystem>
#include <random>

#include "hzdrom/scenario.hpp"

namespace hzdrom::testing {

inline std::filesystem::path source_dir() { return HZDROM_SOURCE_DIR; }
inline std::filesystem::path config_path(const std::string& name) { return source_dir() / "configs" / name; }

inline Scenario walk_scenario() { return Scenario::load(config_path("walk.json")); }

inline Vec5 random_q(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u1(-0.5, 0.5), ua(-1.0, 1.0);
  Vec5 q;
  q << u1(rng), ua(rng), ua(rng), ua(rng), ua(rng);
  return q;
}

inline Vec5 random_qd(std::mt19937_64& rng, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec5 qd;
  for (int i = 0; i < 5; ++i) qd(i) = u(rng);
  return qd;
}

template <class T>
using Point = std::array<T, 2>;

template <class T>
Point<T> along(const Point<T>& from, T theta, double length) {
  return {from[0] + length * std::sin(theta), from[1] + length * std::cos(theta)};
}

template <class T>
struct Pose {
  std::array<T, 5> theta;
  Point<T> pivot, knee, hip, tip, swing_knee, foot;
  std::array<Point<T>, 5> com;
};

template <class T>
Pose<T> pose(const RobotModel& m, const std::array<T, 5>& q) {
  Pose<T> p;
  T acc = T(0);
  for (int i = 0; i < 5; ++i) p.theta[i] = acc = acc + q[i];
  const double ls = m.link(kStanceShin).length, lt = m.link(kStanceThigh).length, lT = m.link(kTorso).length;
  p.pivot = {T(0), T(0)};
  p.knee = along(p.pivot, p.theta[0], ls);
  p.hip = along(p.knee, p.theta[1], lt);
  p.tip = along(p.hip, p.theta[2], lT);
  p.swing_knee = along(p.hip, p.theta[3], -lt);
  p.foot = along(p.swing_knee, p.theta[4], -ls);
  // COM offsets run from the joint nearest the hip.
  p.com[0] = along(p.knee, p.theta[0], -m.link(0).com_offset);
  p.com[1] = along(p.hip, p.theta[1], -m.link(1).com_offset);
  p.com[2] = along(p.hip, p.theta[2], m.link(2).com_offset);
  p.com[3] = along(p.hip, p.theta[3], -m.link(3).com_offset);
  p.com[4] = along(p.swing_knee, p.theta[4], -m.link(4).com_offset);
  return p;
}

inline Pose<double> pose(const RobotModel& m, const Vec5& q) {
  return pose<double>(m, {q(0), q(1), q(2), q(3), q(4)});
}

/// d(point)/dq by complex step. `pick` selects a point from a complex pose.
template <class Pick>
Mat25 complex_jacobian(const RobotModel& m, const Vec5& q, Pick pick) {
  using C = std::complex<double>;
  constexpr double h = 1e-30;
  Mat25 j;
  for (int k = 0; k < 5; ++k) {
    std::array<C, 5> qc;
    for (int i = 0; i < 5; ++i) qc[i] = C(q(i), i == k ? h : 0.0);
    const Point<C> p = pick(pose<C>(m, qc));
    j(0, k) = p[0].imag() / h;
    j(1, k) = p[1].imag() / h;
  }
  return j;
}

/// Rigid-body mass matrix: sum of m Jc^T Jc + I s^T s.
inline Mat5 oracle_mass_matrix(const RobotModel& m, const Vec5& q) {
  Mat5 d = Mat5::Zero();
  for (int i = 0; i < 5; ++i) {
    const Mat25 jc = complex_jacobian(m, q, [i](const auto& p) { return p.com[i]; });
    Eigen::Matrix<double, 1, 5> s = Eigen::Matrix<double, 1, 5>::Zero();
    s.head(i + 1).setOnes();
    d += m.link(i).mass * jc.transpose() * jc + m.link(i).inertia * s.transpose() * s;
  }
  return d;
}

inline double oracle_potential(const RobotModel& m, const Vec5& q) {
  const Pose<double> p = pose(m, q);
  double u = 0.0;
  for (int i = 0; i < 5; ++i) u += m.link(i).mass * m.gravity() * p.com[i][1];
  return u;
}

/// H(q, qd) from the Euler-Lagrange equations with qdd = 0, differentiating
/// the oracle Lagrangian by central differences in q.
inline Vec5 oracle_bias(const RobotModel& m, const Vec5& q, const Vec5& qd, double h = 1e-5) {
  Vec5 dp_dt = Vec5::Zero();
  Vec5 dl_dq;
  for (int k = 0; k < 5; ++k) {
    Vec5 e = Vec5::Zero();
    e(k) = h;
    const Mat5 dp = oracle_mass_matrix(m, q + e), dm = oracle_mass_matrix(m, q - e);
    dp_dt += (dp - dm) / (2 * h) * qd * qd(k);
    const double lp = 0.5 * qd.dot(dp * qd) - oracle_potential(m, q + e);
    const double lm = 0.5 * qd.dot(dm * qd) - oracle_potential(m, q - e);
    dl_dq(k) = (lp - lm) / (2 * h);
  }
  return dp_dt - dl_dq;
}

/// Angular momentum about `about`, sign chosen so a rigid link spinning with
/// theta-rate w contributes I w.
inline double oracle_angular_momentum(const RobotModel& m, const FomState& x, const Point<double>& about) {
  const Pose<double> p = pose(m, x.q);
  double l = 0.0;
  for (int i = 0; i < 5; ++i) {
    const Mat25 jc = complex_jacobian(m, x.q, [i](const auto& pc) { return pc.com[i]; });
    const Vec2 v = jc * x.qd;
    const double rx = p.com[i][0] - about[0], rz = p.com[i][1] - about[1];
    l += m.link(i).mass * (rz * v(0) - rx * v(1)) + m.link(i).inertia * x.qd.head(i + 1).sum();
  }
  return l;
}

/// Largest relative energy error of the unforced chain over [0, duration],
/// integrated at tight tolerances.
inline double passive_energy_drift(const RobotModel& m, const FomState& x0, double duration) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 10>;
  auto unpack = [](const State& s) {
    FomState x;
    for (int i = 0; i < 5; ++i) {
      x.q(i) = s[i];
      x.qd(i) = s[i + 5];
    }
    return x;
  };
  auto rhs = [&](const State& s, State& ds, double) {
    const FomState x = unpack(s);
    const Vec5 qdd = forward_dynamics(m, x, Vec4::Zero());
    for (int i = 0; i < 5; ++i) {
      ds[i] = x.qd(i);
      ds[i + 5] = qdd(i);
    }
  };
  State y;
  for (int i = 0; i < 5; ++i) {
    y[i] = x0.q(i);
    y[i + 5] = x0.qd(i);
  }
  const double e0 = energies(m, x0.q, x0.qd).total();
  double worst = 0.0;
  odeint::integrate_adaptive(odeint::make_controlled(1e-12, 1e-12, odeint::runge_kutta_dopri5<State>()), rhs, y, 0.0,
                             duration, 1e-4, [&](const State& s, double) {
                               const FomState x = unpack(s);
                               worst = std::max(worst, std::abs(energies(m, x.q, x.qd).total() - e0) / std::abs(e0));
                             });
  return worst;
}

}  // namespace hzdrom::testing
