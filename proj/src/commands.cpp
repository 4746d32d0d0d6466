#include "hzdrom/commands.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hzdrom/io.hpp"

namespace hzdrom {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec5 vec5_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 5) throw ConfigError("expected an array of 5 numbers");
  return Vec5(v[0], v[1], v[2], v[3], v[4]);
}

// Fall/stall on the first step of a sweep point still counts as a data row.
WalkTrace run_walk(const Scenario& sc, const Setup& setup, std::optional<std::string>* init_failure = nullptr) {
  FomState x0;
  try {
    x0 = initial_state(sc, setup.controller.embedding());
  } catch (const OutOfChart& e) {
    if (!init_failure) throw SimulationError(std::string("initial state: ") + e.what());
    *init_failure = std::string("initial state: ") + e.what();
    WalkTrace w;
    w.completed = false;
    w.failure = **init_failure;
    return w;
  } catch (const SimulationError& e) {
    if (!init_failure) throw;
    *init_failure = std::string("initial state: ") + e.what();
    WalkTrace w;
    w.completed = false;
    w.failure = **init_failure;
    return w;
  }
  return simulate_walk(sc.robot, setup.controller, x0, sc.n_steps, sc.guard, sc.integrator);
}

json summary_json(const WalkSummary& s) {
  return {{"steps", s.steps},
          {"completed", s.completed},
          {"failure", s.failure},
          {"mean_velocity", s.mean_velocity},
          {"mean_duration", s.mean_duration},
          {"min_duration", s.min_duration},
          {"max_duration", s.max_duration}};
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Decay rate of |h| over the first recorded step.
double first_step_decay(const ZeroDynamicsController& controller, const WalkTrace& walk) {
  if (walk.steps.empty()) return kNaN;
  const StepTrace& st = walk.steps.front();
  std::vector<double> h;
  h.reserve(st.states.size());
  for (size_t i = 0; i < st.states.size(); ++i) {
    h.push_back(controller.manifold_residual(st.states[i], st.times[i], st.context).norm());
  }
  return decay_rate(st.times, h);
}

}  // namespace

Scenario scenario_from_options(const CliOptions& opts) {
  if (opts.config.empty()) throw ConfigError("--config is required");
  Scenario sc = Scenario::load(opts.config);
  if (opts.out) sc.output_dir = opts.out->string();
  if (opts.steps) sc.n_steps = *opts.steps;
  if (opts.seed) sc.seed = *opts.seed;
  if (opts.fixed_step && !(sc.integrator.fixed_dt > 0.0)) sc.integrator.fixed_dt = kDefaultFixedStep;
  sc.validate();
  return sc;
}

WalkSummary summarize_walk(const WalkTrace& walk, int window) {
  WalkSummary s;
  s.steps = static_cast<int>(walk.records.size());
  s.completed = walk.completed;
  s.failure = walk.failure;
  if (walk.records.empty()) return s;
  const int n = static_cast<int>(walk.records.size());
  const int first = std::max(0, n - window);
  double dist = 0.0, time = 0.0;
  s.min_duration = std::numeric_limits<double>::infinity();
  s.max_duration = 0.0;
  for (int k = first; k < n; ++k) {
    dist += walk.records[k].step_length;
    time += walk.records[k].duration;
  }
  for (const auto& r : walk.records) {
    s.min_duration = std::min(s.min_duration, r.duration);
    s.max_duration = std::max(s.max_duration, r.duration);
  }
  s.mean_velocity = dist / time;
  s.mean_duration = time / (n - first);
  return s;
}

std::vector<std::vector<Vec2>> phase_cycles(const WalkTrace& walk) {
  std::vector<std::vector<Vec2>> out;
  for (const auto& st : walk.steps) {
    std::vector<Vec2> c;
    c.reserve(st.states.size());
    for (const auto& x : st.states) c.emplace_back(x.q(0), x.qd(0));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Vec2> steady_z_trace(const RobotModel& model, const WalkTrace& walk, int window) {
  std::vector<Vec2> out;
  const int n = static_cast<int>(walk.steps.size());
  for (int k = std::max(0, n - window); k < n; ++k)
    for (const auto& x : walk.steps[k].states) out.push_back(phi_z(model, x));
  return out;
}

std::vector<Vec2> rom_orbit_z(const Embedding& embedding, int samples) {
  std::vector<Vec2> out;
  for (const auto& s : rom_orbit(embedding.params(), embedding.policy().command, samples)) {
    out.push_back(embedding.xi().forward(Vec2(s.p, s.v)));
  }
  return out;
}

void write_walk(const fs::path& dir, const RobotModel& model, const WalkTrace& walk) {
  CsvWriter trace(dir / "trace.csv", headers::trace());
  CsvWriter zd(dir / "zero_dynamics.csv", headers::zero_dynamics());
  CsvWriter act(dir / "actuated.csv", headers::actuated());
  CsvWriter steps(dir / "steps.csv", headers::steps());
  for (size_t k = 0; k < walk.steps.size(); ++k) {
    const StepTrace& st = walk.steps[k];
    const double t0 = walk.records[k].t_start;
    const double step = static_cast<double>(k);
    for (size_t i = 0; i < st.states.size(); ++i) {
      const FomState& x = st.states[i];
      const Vec4& u = st.controls[i];
      const double t = t0 + st.times[i];
      trace.row({t, step, x.q(0), x.q(1), x.q(2), x.q(3), x.q(4), x.qd(0), x.qd(1), x.qd(2), x.qd(3), x.qd(4), u(0),
                 u(1), u(2), u(3)});
      const EtaZ ez = phi(model, x);
      zd.row({t, step, ez.z(0), x.qd(0), ez.z(1)});
      act.row({t, step, ez.eta1(0), ez.eta1(1), ez.eta1(2), ez.eta1(3), ez.eta2(0), ez.eta2(1), ez.eta2(2),
               ez.eta2(3)});
    }
  }
  for (const auto& r : walk.records) {
    steps.row({static_cast<double>(r.index), r.t_start, r.duration, r.step_length, r.commanded_step, r.z_plus(0),
               r.z_plus(1), r.z_minus(0), r.z_minus(1), r.invariance_residual});
  }
  trace.close();
  zd.close();
  act.close();
  steps.close();
}

WalkAnalysis analyze_walk(const Embedding& embedding, const WalkTrace& walk, int window, int rom_samples) {
  WalkAnalysis out;
  const RobotModel& model = embedding.model();
  out.z_star = embedding.xi().forward(embedding.policy().r_star);
  const std::vector<Vec2> z = pre_impact_z(model, walk);
  out.disturbance = hzd_disturbance(z, embedding.xi(), embedding.policy());
  for (const auto& v : z) out.errors.push_back((v - out.z_star).norm());
  if (out.errors.size() >= 6) out.iss = fit_eiss(out.errors, out.disturbance.norms);

  const std::vector<Vec2> steady = steady_z_trace(model, walk, window);
  if (!steady.empty()) out.orbit = orbit_distance(steady, rom_orbit_z(embedding, rom_samples));

  const auto& d = out.disturbance.norms;
  if (!d.empty()) {
    const std::vector<double> tail(d.end() - std::min<size_t>(d.size(), window), d.end());
    out.window_max_d = *std::max_element(tail.begin(), tail.end());
    out.window_median_d = median(tail);
    out.disturbance_bounded = out.window_max_d <= 2.0 * out.window_median_d;
  }
  return out;
}

json orbit_report_to_json(const OrbitReport& r) {
  return {{"x_star", {{"q", vec_json(r.x_star.q)}, {"qd", vec_json(r.x_star.qd)}}},
          {"period", r.period},
          {"residual", r.residual},
          {"iterations", r.iterations},
          {"eigen_magnitudes", r.eigen_magnitudes},
          {"stable", r.stable}};
}

OrbitReport orbit_report_from_json(const json& doc) {
  OrbitReport r;
  try {
    r.x_star.q = vec5_json(doc.at("x_star").at("q"));
    r.x_star.qd = vec5_json(doc.at("x_star").at("qd"));
    r.period = doc.at("period").get<double>();
    r.residual = doc.at("residual").get<double>();
    r.iterations = doc.at("iterations").get<int>();
    r.eigen_magnitudes = doc.at("eigen_magnitudes").get<std::vector<double>>();
    r.stable = doc.at("stable").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed orbit report: ") + e.what());
  }
  return r;
}

int cmd_simulate(const Scenario& sc, std::ostream& log) {
  const Setup setup = build_setup(sc);
  const WalkTrace walk = run_walk(sc, setup);
  const fs::path dir = sc.output_dir;
  write_walk(dir, sc.robot, walk);
  const WalkSummary s = summarize_walk(walk);
  json doc = summary_json(s);
  doc["requested_steps"] = sc.n_steps;
  doc["command"] = sc.command;
  write_json(dir / "summary.json", doc);
  validate_json(dir / "summary.json", {"steps", "completed", "mean_velocity"});
  log << "simulate: " << s.steps << "/" << sc.n_steps << " steps, mean velocity " << s.mean_velocity << " m/s\n";
  if (!walk.completed) {
    log << "simulate: stopped early: " << walk.failure << "\n";
    return kExitSimulation;
  }
  return kExitOk;
}

int cmd_rom(const Scenario& sc, std::ostream& log) {
  const Setup setup = build_setup(sc);
  const Embedding& em = setup.controller.embedding();
  const fs::path dir = sc.output_dir;

  CsvWriter orbit(dir / "rom_orbit.csv", headers::rom_orbit());
  for (const auto& s : rom_orbit(sc.hlip, sc.command, sc.rom_samples)) {
    Vec2 z(kNaN, kNaN);
    try {
      z = em.xi().forward(Vec2(s.p, s.v));
    } catch (const OutOfChart&) {
    }
    orbit.row({s.t, s.p, s.v, z(0), z(1)});
  }
  orbit.close();

  // Step-to-step iteration from r* shifted by the initial perturbation.
  Vec2 r = setup.policy.r_star;
  if (sc.initial.kind == InitialCondition::Kind::Perturbation) r += sc.initial.dz;
  CsvWriter table(dir / "s2s.csv", headers::s2s());
  for (int k = 0; k <= sc.n_steps; ++k) {
    const double ell = setup.policy.step_length(r);
    table.row({static_cast<double>(k), r(0), r(1), ell, (r - setup.policy.r_star).norm()});
    r = s2s_step(sc.hlip, setup.policy, r).next;
  }
  table.close();
  write_json(dir / "rom.json", {{"r_star", vec_json(setup.policy.r_star)},
                                {"ell_star", setup.policy.ell_star},
                                {"gain", vec_json(setup.policy.gain.transpose())},
                                {"z_star", vec_json(em.xi().forward(setup.policy.r_star))}});
  log << "rom: ell* = " << setup.policy.ell_star << ", r* = (" << setup.policy.r_star(0) << ", "
      << setup.policy.r_star(1) << ")\n";
  return kExitOk;
}

int cmd_find_orbit(const Scenario& sc, std::ostream& log) {
  const Setup setup = build_setup(sc);
  const WalkTrace walk = run_walk(sc, setup);
  if (!walk.completed) {
    log << "find-orbit: warm-start walk failed: " << walk.failure << "\n";
    return kExitSimulation;
  }
  const ReturnMap map = [&](const FomState& x) {
    return poincare(sc.robot, setup.controller, x, sc.guard, sc.integrator);
  };
  OrbitReport report = find_fixed_point(map, sc.robot, walk.final_state());
  report.period = integrate_step(sc.robot, setup.controller, impact_map(sc.robot, report.x_star), sc.guard,
                                 [&] {
                                   IntegratorOptions o = sc.integrator;
                                   o.record = false;
                                   return o;
                                 }())
                      .duration;

  const fs::path dir = sc.output_dir;
  json doc = orbit_report_to_json(report);
  const Embedding& em = setup.controller.embedding();
  doc["z_star_fom"] = vec_json(phi_z(sc.robot, report.x_star));
  doc["z_star_rom"] = vec_json(em.xi().forward(setup.policy.r_star));
  write_json(dir / "orbit.json", doc);
  validate_json(dir / "orbit.json", {"x_star", "period", "residual", "eigen_magnitudes", "stable"});
  CsvWriter eig(dir / "eigenvalues.csv", headers::eigenvalues());
  for (size_t i = 0; i < report.eigen_magnitudes.size(); ++i) {
    eig.row({static_cast<double>(i), report.eigen_magnitudes[i]});
  }
  eig.close();
  log << "find-orbit: residual " << report.residual << " after " << report.iterations << " iterations, period "
      << report.period << " s, max |lambda| " << report.eigen_magnitudes.front() << "\n";
  return kExitOk;
}

int cmd_analyze(const Scenario& sc, std::ostream& log) {
  const Setup setup = build_setup(sc);
  const WalkTrace walk = run_walk(sc, setup);
  const fs::path dir = sc.output_dir;
  const WalkAnalysis a = analyze_walk(setup.controller.embedding(), walk, 10, sc.rom_samples);

  CsvWriter dcsv(dir / "disturbance.csv", headers::disturbance());
  for (size_t k = 0; k < a.disturbance.d.size(); ++k) {
    const Vec2& d = a.disturbance.d[k];
    dcsv.row({static_cast<double>(k), d(0), d(1), d.norm(), a.errors[k]});
  }
  dcsv.close();

  json doc;
  doc["walk"] = summary_json(summarize_walk(walk));
  doc["z_star"] = vec_json(a.z_star);
  doc["d_sup"] = a.disturbance.sup;
  doc["orbit_distance"] = {{"max", a.orbit.max}, {"mean", a.orbit.mean}};
  doc["disturbance_bounded"] = a.disturbance_bounded;
  doc["window_max_d"] = a.window_max_d;
  doc["window_median_d"] = a.window_median_d;
  std::vector<double> inv;
  for (const auto& r : walk.records) inv.push_back(r.invariance_residual);
  doc["invariance_residuals"] = inv;
  if (a.iss) {
    doc["iss"] = {{"m", a.iss->m},
                  {"alpha", a.iss->alpha},
                  {"gamma", a.iss->gamma},
                  {"contracting", a.iss->contracting},
                  {"bound_holds", a.iss->bound_holds},
                  {"errors", a.iss->errors},
                  {"d_norms", a.iss->d_norms}};
  } else {
    doc["iss"] = nullptr;
  }
  write_json(dir / "analysis.json", doc);
  validate_json(dir / "analysis.json", {"walk", "d_sup", "orbit_distance", "iss"});

  if (!walk.completed) {
    log << "analyze: walk stopped early: " << walk.failure << "\n";
    return kExitSimulation;
  }
  if (!a.iss) {
    log << "analyze: fewer than 6 impacts, no E-ISS fit\n";
    return kExitAnalysis;
  }
  log << "analyze: alpha " << a.iss->alpha << ", gamma " << a.iss->gamma << ", |d|_inf " << a.disturbance.sup
      << ", orbit distance " << a.orbit.max << (a.iss->contracting ? "" : " (E-ISS check failed: not contracting)")
      << "\n";
  return kExitOk;
}

int cmd_sweep(const Scenario& sc, std::ostream& log) {
  const std::string& axis = sc.sweep.axis;
  if (axis.empty() || sc.sweep.values.empty()) throw ConfigError("sweep needs an axis and at least one value");
  if (axis != "c" && axis != "perturbation" && axis != "epsilon" && axis != "kp") {
    throw ConfigError("unknown sweep axis '" + axis + "' (c | perturbation | epsilon | kp)");
  }
  const fs::path dir = sc.output_dir;
  CsvWriter out(dir / "sweep.csv", headers::sweep());
  for (double value : sc.sweep.values) {
    Scenario point = sc;
    if (axis == "c") {
      point.command = value;
    } else if (axis == "perturbation") {
      point.initial.kind = InitialCondition::Kind::Perturbation;
      point.initial.dz = Vec2(value, value);
    } else if (axis == "epsilon") {
      point.controller.epsilon = value;
    } else {
      point.controller.kp = Vec4::Constant(value);
    }
    point.validate();
    const Setup setup = build_setup(point);
    std::optional<std::string> init_failure;
    const WalkTrace walk = run_walk(point, setup, &init_failure);
    const WalkSummary s = summarize_walk(walk);
    double d_sup = kNaN, gamma = kNaN, alpha = kNaN;
    if (!init_failure) {
      const WalkAnalysis a = analyze_walk(setup.controller.embedding(), walk, 10, point.rom_samples);
      d_sup = a.disturbance.sup;
      if (a.iss) {
        gamma = a.iss->gamma;
        alpha = a.iss->alpha;
      }
    }
    const double rate = first_step_decay(setup.controller, walk);
    out.row({value, s.completed ? 1.0 : 0.0, static_cast<double>(s.steps), s.mean_velocity, s.mean_duration, d_sup,
             gamma, alpha, rate});
    log << "sweep " << axis << " = " << value << ": " << (s.completed ? "ok" : "failed: " + s.failure) << "\n";
  }
  out.close();
  return kExitOk;
}

int run_command(const std::string& verb, const CliOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    const Scenario sc = scenario_from_options(opts);
    if (verb == "simulate") return cmd_simulate(sc, log);
    if (verb == "rom") return cmd_rom(sc, log);
    if (verb == "find-orbit") return cmd_find_orbit(sc, log);
    if (verb == "analyze") return cmd_analyze(sc, log);
    if (verb == "sweep") return cmd_sweep(sc, log);
    err << "unknown command '" << verb << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AnalysisError& e) {
    err << "analysis failed: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const SimulationError& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const OutOfChart& e) {
    err << "simulation failed: " << e.what() << "\n";
    return kExitSimulation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hzdrom
