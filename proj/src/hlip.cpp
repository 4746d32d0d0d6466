#include "hzdrom/hlip.hpp"

#include <cmath>
#include <complex>

namespace hzdrom {

double HlipParams::lambda() const { return std::sqrt(gravity / z0); }

void HlipParams::validate() const {
  if (!(mass > 0.0) || !(z0 > 0.0) || !(t_ssp > 0.0) || !(gravity > 0.0)) {
    throw ConfigError("HLIP parameters must all be positive");
  }
}

Mat2 ssp_flow_matrix(const HlipParams& params, double t) {
  const double lam = params.lambda();
  const double c = std::cosh(lam * t);
  const double s = std::sinh(lam * t);
  Mat2 m;
  m << c, s / lam, lam * s, c;
  return m;
}

Vec2 ssp_flow(const HlipParams& params, const Vec2& r, double t) { return ssp_flow_matrix(params, t) * r; }

HlipState ssp_flow(const HlipParams& params, const HlipState& r, double t) {
  return HlipState::from(ssp_flow(params, r.vec(), t));
}

S2SMatrices s2s_matrices(const HlipParams& params) {
  S2SMatrices m;
  m.a = ssp_flow_matrix(params, params.t_ssp);
  m.b = -m.a.col(0);
  return m;
}

RowVec2 deadbeat_gain(const HlipParams& params) {
  const auto [a, b] = s2s_matrices(params);
  Mat2 ctrb;
  ctrb << b, a * b;
  if (std::abs(ctrb.determinant()) < 1e-14) throw std::domain_error("S2S pair is not reachable");
  // Desired characteristic polynomial z^2, so phi(A) = A^2 and
  // u = -e2^T C^{-1} A^2 x.
  const RowVec2 e2(0.0, 1.0);
  return -e2 * ctrb.inverse() * a * a;
}

HlipFixedPoint fixed_point(const HlipParams& params, double command) {
  params.validate();
  const auto [a, b] = s2s_matrices(params);
  HlipFixedPoint fp;
  fp.ell_star = command * params.t_ssp;
  fp.r_star = (Mat2::Identity() - a).partialPivLu().solve(b * fp.ell_star);
  return fp;
}

Mat2 closed_loop_matrix(const HlipParams& params, const RowVec2& gain) {
  const auto [a, b] = s2s_matrices(params);
  return a + b * gain;
}

double spectral_radius(const Mat2& m) {
  const double tr = m.trace();
  const double det = m.determinant();
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4.0 * det));
  return std::max(std::abs(0.5 * (tr + disc)), std::abs(0.5 * (tr - disc)));
}

StepPolicy make_policy(const HlipParams& params, double command) {
  StepPolicy policy = make_policy(params, command, deadbeat_gain(params));
  policy.mode = PolicyMode::Deadbeat;
  return policy;
}

StepPolicy make_policy(const HlipParams& params, double command, const RowVec2& gain) {
  const HlipFixedPoint fp = fixed_point(params, command);
  if (!(spectral_radius(closed_loop_matrix(params, gain)) < 1.0)) {
    throw ConfigError("step gain does not stabilize the S2S dynamics");
  }
  StepPolicy policy;
  policy.gain = gain;
  policy.ell_star = fp.ell_star;
  policy.r_star = fp.r_star;
  policy.command = command;
  policy.mode = PolicyMode::Custom;
  return policy;
}

S2SStep s2s_step(const HlipParams& params, const StepPolicy& policy, const Vec2& r) {
  const auto [a, b] = s2s_matrices(params);
  S2SStep out;
  out.ell = policy.step_length(r);
  out.next = a * r + b * out.ell;
  return out;
}

std::vector<RomSample> rom_orbit(const HlipParams& params, double command, int samples) {
  if (samples < 2) throw std::invalid_argument("rom_orbit needs at least two samples");
  const HlipFixedPoint fp = fixed_point(params, command);
  const Vec2 post = fp.r_star - Vec2(fp.ell_star, 0.0);
  std::vector<RomSample> out;
  out.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    const double t = params.t_ssp * i / (samples - 1);
    const Vec2 r = ssp_flow(params, post, t);
    out.push_back({t, r(0), r(1)});
  }
  return out;
}

}  // namespace hzdrom
