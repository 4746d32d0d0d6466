#include "hzdrom/model.hpp"

#include <cmath>
#include <string>

namespace hzdrom {

namespace {

Vec2 unit(double theta) { return Vec2(std::sin(theta), std::cos(theta)); }
Vec2 unit_derivative(double theta) { return Vec2(std::cos(theta), -std::sin(theta)); }

void check_link(const LinkParams& p, const char* name) {
  if (!(p.mass > 0.0) || !(p.length > 0.0) || !(p.inertia >= 0.0) || !std::isfinite(p.com_offset)) {
    throw ConfigError(std::string("invalid parameters for link ") + name);
  }
}

bool same_params(const LinkParams& a, const LinkParams& b) {
  return a.mass == b.mass && a.length == b.length && a.com_offset == b.com_offset &&
         a.inertia == b.inertia;
}

}  // namespace

RobotModel::RobotModel(const std::array<LinkParams, 5>& links, double gravity)
    : links_(links), gravity_(gravity) {
  static const char* names[5] = {"stance_shin", "stance_thigh", "torso", "swing_thigh", "swing_shin"};
  for (int i = 0; i < 5; ++i) check_link(links_[i], names[i]);
  if (!(gravity_ > 0.0)) throw ConfigError("gravity must be positive");
  // Relabeling at impact swaps the legs, so they must be identical.
  if (!same_params(links_[kStanceThigh], links_[kSwingThigh]) ||
      !same_params(links_[kStanceShin], links_[kSwingShin])) {
    throw ConfigError("stance and swing legs must have identical parameters");
  }

  angle_map_.setZero();
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j <= i; ++j) angle_map_(i, j) = 1.0;

  const double ls = links_[kStanceShin].length;
  const double lt = links_[kStanceThigh].length;
  const double ds = links_[kStanceShin].com_offset;
  const double dt = links_[kStanceThigh].com_offset;
  const double dtor = links_[kTorso].com_offset;

  com_coeffs_[kStanceShin] << ls - ds, 0, 0, 0, 0;
  com_coeffs_[kStanceThigh] << ls, lt - dt, 0, 0, 0;
  com_coeffs_[kTorso] << ls, lt, dtor, 0, 0;
  com_coeffs_[kSwingThigh] << ls, lt, 0, -dt, 0;
  com_coeffs_[kSwingShin] << ls, lt, 0, -lt, -ds;

  mass_weights_.setZero();
  gravity_weights_.setZero();
  for (int i = 0; i < 5; ++i) {
    const double m = links_[i].mass;
    total_mass_ += m;
    mass_weights_ += m * com_coeffs_[i] * com_coeffs_[i].transpose();
    gravity_weights_ += m * com_coeffs_[i];
  }
}

RobotModel RobotModel::default_biped() {
  const LinkParams leg{5.0, 0.4, 0.2, 5.0 * 0.4 * 0.4 / 12.0};
  const LinkParams torso{10.0, 0.5, 0.25, 10.0 * 0.5 * 0.5 / 12.0};
  return RobotModel({leg, leg, torso, leg, leg}, 9.81);
}

RobotModel RobotModel::from_json(const nlohmann::json& doc) {
  const auto& links = doc.at("links");
  if (!links.is_array() || links.size() != 5) throw ConfigError("robot.links must be an array of 5 links");
  std::array<LinkParams, 5> params;
  for (int i = 0; i < 5; ++i) {
    const auto& l = links[i];
    params[i].mass = l.at("mass").get<double>();
    params[i].length = l.at("length").get<double>();
    params[i].com_offset = l.value("com_offset", params[i].length / 2.0);
    params[i].inertia = l.value("inertia", params[i].mass * params[i].length * params[i].length / 12.0);
  }
  return RobotModel(params, doc.value("gravity", 9.81));
}

nlohmann::json RobotModel::to_json() const {
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : links_) {
    links.push_back({{"mass", l.mass}, {"length", l.length}, {"com_offset", l.com_offset}, {"inertia", l.inertia}});
  }
  return {{"links", links}, {"gravity", gravity_}};
}

Vec5 RobotModel::stance_knee_coeffs() const {
  Vec5 a;
  a << shin_length(), 0, 0, 0, 0;
  return a;
}

Vec5 RobotModel::hip_coeffs() const {
  Vec5 a;
  a << shin_length(), thigh_length(), 0, 0, 0;
  return a;
}

Vec5 RobotModel::torso_tip_coeffs() const {
  Vec5 a;
  a << shin_length(), thigh_length(), links_[kTorso].length, 0, 0;
  return a;
}

Vec5 RobotModel::swing_knee_coeffs() const {
  Vec5 a;
  a << shin_length(), thigh_length(), 0, -thigh_length(), 0;
  return a;
}

Vec5 RobotModel::swing_foot_coeffs() const {
  Vec5 a;
  a << shin_length(), thigh_length(), 0, -thigh_length(), -shin_length();
  return a;
}

Vec5 link_angles(const RobotModel& model, const Vec5& q) { return model.angle_map() * q; }

Vec2 point_position(const RobotModel& model, const Vec5& coeffs, const Vec5& q) {
  const Vec5 th = link_angles(model, q);
  Vec2 p = Vec2::Zero();
  for (int j = 0; j < 5; ++j)
    if (coeffs(j) != 0.0) p += coeffs(j) * unit(th(j));
  return p;
}

Mat25 point_jacobian(const RobotModel& model, const Vec5& coeffs, const Vec5& q) {
  const Vec5 th = link_angles(model, q);
  // d p / d theta_j, then chain through theta = S q.
  Mat25 by_angle;
  for (int j = 0; j < 5; ++j) by_angle.col(j) = coeffs(j) * unit_derivative(th(j));
  return by_angle * model.angle_map();
}

Vec2 point_jacobian_dot_qd(const RobotModel& model, const Vec5& coeffs, const Vec5& q, const Vec5& qd) {
  const Vec5 th = link_angles(model, q);
  const Vec5 thd = model.angle_map() * qd;
  Vec2 acc = Vec2::Zero();
  for (int j = 0; j < 5; ++j) acc -= coeffs(j) * thd(j) * thd(j) * unit(th(j));
  return acc;
}

Keypoints fk(const RobotModel& model, const Vec5& q) {
  Keypoints k;
  k.pivot = Vec2::Zero();
  k.stance_knee = point_position(model, model.stance_knee_coeffs(), q);
  k.hip = point_position(model, model.hip_coeffs(), q);
  k.torso_tip = point_position(model, model.torso_tip_coeffs(), q);
  k.swing_knee = point_position(model, model.swing_knee_coeffs(), q);
  k.swing_foot = point_position(model, model.swing_foot_coeffs(), q);
  k.com = point_position(model, model.com_total_coeffs(), q);
  return k;
}

Mat25 swing_foot_jacobian(const RobotModel& model, const Vec5& q) {
  return point_jacobian(model, model.swing_foot_coeffs(), q);
}

Mat25 com_jacobian(const RobotModel& model, const Vec5& q) {
  return point_jacobian(model, model.com_total_coeffs(), q);
}

// In absolute angles the inertia matrix is W_jl cos(theta_j - theta_l) + diag(I);
// D = S^T M_theta S.
Mat5 mass_matrix(const RobotModel& model, const Vec5& q) {
  const Vec5 th = link_angles(model, q);
  const Mat5& w = model.mass_weights();
  Mat5 m_theta;
  for (int j = 0; j < 5; ++j) {
    for (int l = 0; l < 5; ++l) m_theta(j, l) = w(j, l) * std::cos(th(j) - th(l));
    m_theta(j, j) += model.link(j).inertia;
  }
  const Mat5& s = model.angle_map();
  Mat5 d = s.transpose() * m_theta * s;
  return 0.5 * (d + d.transpose());
}

std::array<Mat5, 5> mass_matrix_partials(const RobotModel& model, const Vec5& q) {
  const Vec5 th = link_angles(model, q);
  const Mat5& w = model.mass_weights();
  const Mat5& s = model.angle_map();
  std::array<Mat5, 5> out;
  for (int k = 0; k < 5; ++k) {
    Mat5 dm;
    for (int j = 0; j < 5; ++j)
      for (int l = 0; l < 5; ++l) dm(j, l) = -w(j, l) * std::sin(th(j) - th(l)) * (s(j, k) - s(l, k));
    out[k] = s.transpose() * dm * s;
  }
  return out;
}

Mat5 coriolis_matrix(const RobotModel& model, const Vec5& q, const Vec5& qd) {
  const auto dd = mass_matrix_partials(model, q);
  Mat5 c = Mat5::Zero();
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i)
        c(k, j) += 0.5 * (dd[i](k, j) + dd[j](k, i) - dd[k](i, j)) * qd(i);
  return c;
}

Vec5 gravity_vector(const RobotModel& model, const Vec5& q) {
  const Vec5 th = link_angles(model, q);
  const Vec5& w = model.gravity_weights();
  Vec5 g_theta;
  for (int j = 0; j < 5; ++j) g_theta(j) = -model.gravity() * w(j) * std::sin(th(j));
  return model.angle_map().transpose() * g_theta;
}

Vec5 bias_vector(const RobotModel& model, const Vec5& q, const Vec5& qd) {
  return coriolis_matrix(model, q, qd) * qd + gravity_vector(model, q);
}

double potential_energy(const RobotModel& model, const Vec5& q) {
  const Vec5 th = link_angles(model, q);
  const Vec5& w = model.gravity_weights();
  double u = 0.0;
  for (int j = 0; j < 5; ++j) u += w(j) * std::cos(th(j));
  return model.gravity() * u;
}

Energies energies(const RobotModel& model, const Vec5& q, const Vec5& qd) {
  return {0.5 * qd.dot(mass_matrix(model, q) * qd), potential_energy(model, q)};
}

Mat54 actuation_matrix() {
  Mat54 b = Mat54::Zero();
  b.bottomRows<4>().setIdentity();
  return b;
}

Vec5 forward_dynamics(const RobotModel& model, const FomState& x, const Vec4& u) {
  const Mat5 d = mass_matrix(model, x.q);
  const Vec5 rhs = actuation_matrix() * u - bias_vector(model, x.q, x.qd);
  return d.llt().solve(rhs);
}

}  // namespace hzdrom
