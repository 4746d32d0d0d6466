#include "hzdrom/scenario.hpp"

#include <fstream>
#include <random>
#include <set>

namespace hzdrom {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

Vec4 gain_vector(const json& v, const char* name) {
  if (v.is_number()) return Vec4::Constant(v.get<double>());
  if (v.is_array() && v.size() == 4) return Vec4(v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>());
  throw ConfigError(std::string("controller.") + name + " must be a number or an array of 4");
}

Vec5 vec5(const json& v, const char* name) {
  if (!v.is_array() || v.size() != 5) throw ConfigError(std::string(name) + " must be an array of 5");
  Vec5 out;
  for (int i = 0; i < 5; ++i) out(i) = v[i].get<double>();
  return out;
}

template <class E>
E parse_enum(const json& v, const std::vector<std::pair<const char*, E>>& names, const char* what) {
  const std::string s = v.get<std::string>();
  for (const auto& [n, e] : names)
    if (s == n) return e;
  throw ConfigError(std::string("invalid ") + what + " '" + s + "'");
}

const std::vector<std::pair<const char*, PhaseMode>> kPhaseNames{{"time", PhaseMode::Time}, {"state", PhaseMode::State}};
const std::vector<std::pair<const char*, ReplanMode>> kReplanNames{{"replan", ReplanMode::Replan},
                                                                   {"openloop", ReplanMode::OpenLoop}};
const std::vector<std::pair<const char*, IkBase>> kIkNames{{"two_link", IkBase::TwoLink},
                                                           {"virtual_leg", IkBase::VirtualLeg}};
const std::vector<std::pair<const char*, ControlMode>> kModeNames{{"pd", ControlMode::Pd},
                                                                  {"invariance", ControlMode::Invariance},
                                                                  {"io_linearization", ControlMode::IoLinearization}};

template <class E>
std::string enum_name(E e, const std::vector<std::pair<const char*, E>>& names) {
  for (const auto& [n, v] : names)
    if (v == e) return n;
  return "?";
}

}  // namespace

Scenario Scenario::from_json(const json& doc, const std::filesystem::path& base_dir) {
  try {
    reject_unknown(doc,
                   {"robot", "robot_file", "hlip", "command", "policy", "embedding", "controller", "guard",
                    "integrator", "n_steps", "initial", "seed", "output_dir", "rom_samples", "sweep"},
                   "scenario");
    Scenario sc;
    if (doc.contains("robot") && doc.contains("robot_file")) throw ConfigError("give either robot or robot_file");
    if (doc.contains("robot")) sc.robot = RobotModel::from_json(doc["robot"]);
    if (doc.contains("robot_file")) {
      const std::filesystem::path p = base_dir / doc["robot_file"].get<std::string>();
      std::ifstream in(p);
      if (!in) throw ConfigError("robot_file not found: " + p.string());
      sc.robot = RobotModel::from_json(json::parse(in));
    }

    sc.hlip.mass = sc.robot.total_mass();
    sc.hlip.gravity = sc.robot.gravity();
    if (doc.contains("hlip")) {
      const json& h = doc["hlip"];
      reject_unknown(h, {"mass", "z0", "t_ssp", "gravity"}, "hlip");
      sc.hlip.mass = h.value("mass", sc.hlip.mass);
      sc.hlip.z0 = h.value("z0", sc.hlip.z0);
      sc.hlip.t_ssp = h.value("t_ssp", sc.hlip.t_ssp);
      sc.hlip.gravity = h.value("gravity", sc.hlip.gravity);
    }
    sc.command = doc.value("command", sc.command);

    if (doc.contains("policy")) {
      const json& p = doc["policy"];
      reject_unknown(p, {"mode", "gain"}, "policy");
      const std::string mode = p.value("mode", std::string("deadbeat"));
      if (mode == "custom") {
        const json& g = p.at("gain");
        if (!g.is_array() || g.size() != 2) throw ConfigError("policy.gain must be an array of 2");
        sc.gain = RowVec2(g[0].get<double>(), g[1].get<double>());
      } else if (mode != "deadbeat") {
        throw ConfigError("invalid policy mode '" + mode + "'");
      }
    }

    sc.embedding.hip_height = sc.hlip.z0;
    if (doc.contains("embedding")) {
      const json& e = doc["embedding"];
      reject_unknown(e,
                     {"hip_height", "torso_angle", "swing_apex", "landing_weight", "phase", "replan",
                      "replan_interval", "ik_base", "com_offset"},
                     "embedding");
      EmbeddingConfig& c = sc.embedding;
      c.hip_height = e.value("hip_height", c.hip_height);
      c.torso_angle = e.value("torso_angle", c.torso_angle);
      c.swing_apex = e.value("swing_apex", c.swing_apex);
      c.landing_weight = e.value("landing_weight", c.landing_weight);
      if (e.contains("phase")) c.phase = parse_enum(e["phase"], kPhaseNames, "phase mode");
      if (e.contains("replan")) c.replan = parse_enum(e["replan"], kReplanNames, "replan mode");
      c.replan_interval = e.value("replan_interval", c.replan_interval);
      c.com_offset = e.value("com_offset", c.com_offset);
      if (e.contains("ik_base")) c.ik_base = parse_enum(e["ik_base"], kIkNames, "ik_base");
    }

    if (doc.contains("controller")) {
      const json& c = doc["controller"];
      reject_unknown(c, {"mode", "kp", "kd", "epsilon", "fd_step"}, "controller");
      if (c.contains("mode")) sc.controller.mode = parse_enum(c["mode"], kModeNames, "controller mode");
      if (c.contains("kp")) sc.controller.kp = gain_vector(c["kp"], "kp");
      if (c.contains("kd")) sc.controller.kd = gain_vector(c["kd"], "kd");
      sc.controller.epsilon = c.value("epsilon", sc.controller.epsilon);
      sc.controller.fd_step = c.value("fd_step", sc.controller.fd_step);
    }

    if (doc.contains("guard")) {
      const json& g = doc["guard"];
      reject_unknown(g, {"clearance", "tau_min", "margin"}, "guard");
      sc.guard.clearance = g.value("clearance", sc.guard.clearance);
      sc.guard.tau_min = g.value("tau_min", sc.guard.tau_min);
      sc.guard.margin = g.value("margin", sc.guard.margin);
    }

    if (doc.contains("integrator")) {
      const json& i = doc["integrator"];
      reject_unknown(i,
                     {"rel_tol", "abs_tol", "max_dt", "initial_dt", "fixed_dt", "t_max", "state_bound", "event_tol",
                      "min_hip_height", "max_torso_tilt"},
                     "integrator");
      IntegratorOptions& o = sc.integrator;
      o.rel_tol = i.value("rel_tol", o.rel_tol);
      o.abs_tol = i.value("abs_tol", o.abs_tol);
      o.max_dt = i.value("max_dt", o.max_dt);
      o.initial_dt = i.value("initial_dt", o.initial_dt);
      o.fixed_dt = i.value("fixed_dt", o.fixed_dt);
      o.t_max = i.value("t_max", o.t_max);
      o.state_bound = i.value("state_bound", o.state_bound);
      o.event_tol = i.value("event_tol", o.event_tol);
      o.min_hip_height = i.value("min_hip_height", o.min_hip_height);
      o.max_torso_tilt = i.value("max_torso_tilt", o.max_torso_tilt);
    }

    sc.n_steps = doc.value("n_steps", sc.n_steps);

    if (doc.contains("initial")) {
      const json& ic = doc["initial"];
      reject_unknown(ic, {"type", "dz", "magnitude", "q", "qd"}, "initial");
      const std::string type = ic.value("type", std::string("nominal"));
      if (type == "nominal") {
        sc.initial.kind = InitialCondition::Kind::Nominal;
      } else if (type == "perturbation") {
        sc.initial.kind = InitialCondition::Kind::Perturbation;
        const json& dz = ic.at("dz");
        if (!dz.is_array() || dz.size() != 2) throw ConfigError("initial.dz must be an array of 2");
        sc.initial.dz = Vec2(dz[0].get<double>(), dz[1].get<double>());
      } else if (type == "random") {
        sc.initial.kind = InitialCondition::Kind::Random;
        sc.initial.magnitude = ic.value("magnitude", sc.initial.magnitude);
      } else if (type == "state") {
        sc.initial.kind = InitialCondition::Kind::State;
        sc.initial.state.q = vec5(ic.at("q"), "initial.q");
        sc.initial.state.qd = vec5(ic.at("qd"), "initial.qd");
      } else {
        throw ConfigError("invalid initial type '" + type + "'");
      }
    }

    sc.seed = doc.value("seed", sc.seed);
    sc.output_dir = doc.value("output_dir", sc.output_dir);
    sc.rom_samples = doc.value("rom_samples", sc.rom_samples);
    if (doc.contains("sweep")) {
      const json& s = doc["sweep"];
      reject_unknown(s, {"axis", "values"}, "sweep");
      sc.sweep.axis = s.value("axis", std::string());
      if (s.contains("values")) sc.sweep.values = s["values"].get<std::vector<double>>();
    }
    sc.validate();
    return sc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
}

Scenario Scenario::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

void Scenario::validate() const {
  hlip.validate();
  embedding.validate(robot.leg_length());
  controller.validate();
  guard.validate();
  integrator.validate();
  if (n_steps < 0) throw ConfigError("n_steps must be non-negative");
  if (rom_samples < 2) throw ConfigError("rom_samples must be at least 2");
  if (!std::isfinite(command)) throw ConfigError("command must be finite");
  if (!(initial.magnitude >= 0.0)) throw ConfigError("initial.magnitude must be non-negative");
}

json Scenario::to_json() const {
  json doc;
  doc["robot"] = robot.to_json();
  doc["hlip"] = {{"mass", hlip.mass}, {"z0", hlip.z0}, {"t_ssp", hlip.t_ssp}, {"gravity", hlip.gravity}};
  doc["command"] = command;
  if (gain) {
    doc["policy"] = {{"mode", "custom"}, {"gain", {(*gain)(0), (*gain)(1)}}};
  } else {
    doc["policy"] = {{"mode", "deadbeat"}};
  }
  doc["embedding"] = {{"hip_height", embedding.hip_height},
                      {"torso_angle", embedding.torso_angle},
                      {"swing_apex", embedding.swing_apex},
                      {"landing_weight", embedding.landing_weight},
                      {"phase", enum_name(embedding.phase, kPhaseNames)},
                      {"replan", enum_name(embedding.replan, kReplanNames)},
                      {"replan_interval", embedding.replan_interval},
                      {"com_offset", embedding.com_offset},
                      {"ik_base", enum_name(embedding.ik_base, kIkNames)}};
  const auto& c = controller;
  doc["controller"] = {{"mode", enum_name(c.mode, kModeNames)},
                       {"kp", {c.kp(0), c.kp(1), c.kp(2), c.kp(3)}},
                       {"kd", {c.kd(0), c.kd(1), c.kd(2), c.kd(3)}},
                       {"epsilon", c.epsilon},
                       {"fd_step", c.fd_step}};
  doc["guard"] = {{"clearance", guard.clearance}, {"tau_min", guard.tau_min}, {"margin", guard.margin}};
  const auto& o = integrator;
  doc["integrator"] = {{"rel_tol", o.rel_tol},       {"abs_tol", o.abs_tol},
                       {"max_dt", o.max_dt},         {"initial_dt", o.initial_dt},
                       {"fixed_dt", o.fixed_dt},     {"t_max", o.t_max},
                       {"state_bound", o.state_bound}, {"event_tol", o.event_tol},
                       {"min_hip_height", o.min_hip_height}, {"max_torso_tilt", o.max_torso_tilt}};
  doc["n_steps"] = n_steps;
  switch (initial.kind) {
    case InitialCondition::Kind::Nominal:
      doc["initial"] = {{"type", "nominal"}};
      break;
    case InitialCondition::Kind::Perturbation:
      doc["initial"] = {{"type", "perturbation"}, {"dz", {initial.dz(0), initial.dz(1)}}};
      break;
    case InitialCondition::Kind::Random:
      doc["initial"] = {{"type", "random"}, {"magnitude", initial.magnitude}};
      break;
    case InitialCondition::Kind::State: {
      const auto& x = initial.state;
      doc["initial"] = {{"type", "state"},
                        {"q", std::vector<double>(x.q.data(), x.q.data() + 5)},
                        {"qd", std::vector<double>(x.qd.data(), x.qd.data() + 5)}};
      break;
    }
  }
  doc["seed"] = seed;
  doc["output_dir"] = output_dir;
  doc["rom_samples"] = rom_samples;
  if (!sweep.axis.empty()) doc["sweep"] = {{"axis", sweep.axis}, {"values", sweep.values}};
  return doc;
}

Setup build_setup(const Scenario& sc) {
  const StepPolicy policy = sc.gain ? make_policy(sc.hlip, sc.command, *sc.gain) : make_policy(sc.hlip, sc.command);
  return Setup{policy, ZeroDynamicsController(Embedding(sc.robot, sc.hlip, policy, sc.embedding), sc.controller)};
}

FomState initial_state(const Scenario& sc, const Embedding& embedding) {
  const Vec2 z_star = embedding.xi().forward(embedding.policy().r_star);
  switch (sc.initial.kind) {
    case InitialCondition::Kind::Nominal:
      return embedding.pre_impact_from_z(z_star);
    case InitialCondition::Kind::Perturbation:
      return embedding.pre_impact_from_z(z_star + sc.initial.dz);
    case InitialCondition::Kind::Random: {
      std::mt19937_64 rng(sc.seed);
      std::uniform_real_distribution<double> u(-sc.initial.magnitude, sc.initial.magnitude);
      const double a = u(rng);
      const double b = u(rng);
      return embedding.pre_impact_from_z(z_star + Vec2(a, b));
    }
    case InitialCondition::Kind::State:
      return sc.initial.state;
  }
  return embedding.pre_impact_from_z(z_star);
}

}  // namespace hzdrom
