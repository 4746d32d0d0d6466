#pragma once

#include <vector>

#include "hzdrom/types.hpp"

namespace hzdrom {

/// Hybrid linear inverted pendulum: point mass at constant height z0,
/// single-support phases of fixed length t_ssp, instantaneous foot swaps.
struct HlipParams {
  double mass = 30.0;
  double z0 = 0.7;
  double t_ssp = 0.3;
  double gravity = 9.81;

  double lambda() const;
  void validate() const;
};

/// Mass position and velocity relative to the current stance foot.
struct HlipState {
  double p = 0.0;
  double v = 0.0;

  Vec2 vec() const { return Vec2(p, v); }
  static HlipState from(const Vec2& r) { return {r(0), r(1)}; }
};

enum class PolicyMode { Deadbeat, Custom };

/// Step-length feedback ell = ell* + K (r - r*).
struct StepPolicy {
  RowVec2 gain = RowVec2::Zero();
  double ell_star = 0.0;
  Vec2 r_star = Vec2::Zero();
  double command = 0.0;
  PolicyMode mode = PolicyMode::Deadbeat;

  double step_length(const Vec2& r) const { return ell_star + gain * (r - r_star); }
};

struct S2SMatrices {
  Mat2 a;
  Vec2 b;
};

struct HlipFixedPoint {
  Vec2 r_star;
  double ell_star = 0.0;
};

struct S2SStep {
  Vec2 next;
  double ell = 0.0;
};

struct RomSample {
  double t = 0.0;
  double p = 0.0;
  double v = 0.0;
};

/// exp(A_ssp t) in closed form.
Mat2 ssp_flow_matrix(const HlipParams& params, double t);
HlipState ssp_flow(const HlipParams& params, const HlipState& r, double t);
Vec2 ssp_flow(const HlipParams& params, const Vec2& r, double t);

S2SMatrices s2s_matrices(const HlipParams& params);

/// Gain placing both closed-loop S2S eigenvalues at the origin
/// (Ackermann's formula for a nilpotent A_R + B_R K).
RowVec2 deadbeat_gain(const HlipParams& params);

/// Period-one orbit for velocity command c: ell* = c T_ssp and
/// r* = A_R r* + B_R ell*.
HlipFixedPoint fixed_point(const HlipParams& params, double command);

/// Policy for command c. Without a gain the deadbeat gain is used; a custom
/// gain must make A_R + B_R K Schur stable.
StepPolicy make_policy(const HlipParams& params, double command);
StepPolicy make_policy(const HlipParams& params, double command, const RowVec2& gain);

S2SStep s2s_step(const HlipParams& params, const StepPolicy& policy, const Vec2& r);

/// Closed-loop S2S matrix A_R + B_R K.
Mat2 closed_loop_matrix(const HlipParams& params, const RowVec2& gain);
double spectral_radius(const Mat2& m);

/// Samples of the single-support flow of the period-one orbit, from the
/// post-step state r* - (ell*, 0) to r* over [0, T_ssp]. samples >= 2.
std::vector<RomSample> rom_orbit(const HlipParams& params, double command, int samples);

}  // namespace hzdrom
