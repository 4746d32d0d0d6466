// Acceptance suite: one PASS/FAIL line per criterion, with the measured values.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>

#include "hzdrom/analysis.hpp"
#include "hzdrom/commands.hpp"
#include "hzdrom/io.hpp"
#include "support.hpp"

using namespace hzdrom;
using namespace hzdrom::testing;
namespace fs = std::filesystem;

namespace {

const RobotModel kModel = RobotModel::default_biped();

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body, double budget = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget > 0.0 && secs > budget) {
    o.pass = false;
    o.detail += " [over time budget " + std::to_string(budget) + " s]";
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared walk of the reference scenario, reused by criteria 4, 5, 6 and 9.
struct Reference {
  Scenario sc;
  Setup setup;
  WalkTrace walk;
  double seconds = 0.0;
};

Reference& reference() {
  static std::optional<Reference> ref;
  if (!ref) {
    Scenario sc = walk_scenario();
    sc.output_dir = "acceptance_out/walk";
    Setup setup = build_setup(sc);
    const auto t0 = std::chrono::steady_clock::now();
    const FomState x0 = initial_state(sc, setup.controller.embedding());
    WalkTrace walk = simulate_walk(sc.robot, setup.controller, x0, sc.n_steps, sc.guard, sc.integrator);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ref.emplace(Reference{std::move(sc), std::move(setup), std::move(walk), secs});
  }
  return *ref;
}

Outcome dynamics() {
  std::mt19937_64 rng(2024);
  double worst_sym = 0.0, worst_q1 = 0.0, worst_h = 0.0, min_eig = 1e300;
  for (int n = 0; n < 1000; ++n) {
    const Vec5 q = random_q(rng), qd = random_qd(rng);
    const Mat5 d = mass_matrix(kModel, q);
    worst_sym = std::max(worst_sym, (d - d.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Mat5>(d).eigenvalues().minCoeff());
    Vec5 shifted = q;
    shifted(0) += 0.37;
    worst_q1 = std::max(worst_q1, (mass_matrix(kModel, shifted) - d).cwiseAbs().maxCoeff());
    const Vec5 o = oracle_bias(kModel, q, qd);
    worst_h = std::max(worst_h, (bias_vector(kModel, q, qd) - o).norm() / o.norm());
  }

  double drift = 0.0;
  for (int n = 0; n < 5; ++n) drift = std::max(drift, passive_energy_drift(kModel, {random_q(rng), random_qd(rng, 1.0)}, 1.0));
  const bool pass = worst_sym < 1e-12 && min_eig > 0.0 && worst_q1 < 1e-10 && worst_h < 1e-5 && drift < 1e-6;
  return {pass, fmt("sym %.1e, min eig %.3g, q1 dependence %.1e, H rel err %.1e, energy drift %.1e", worst_sym,
                    min_eig, worst_q1, worst_h, drift)};
}

Outcome impacts() {
  std::mt19937_64 rng(7);
  double pose_err = 0.0, mom_err = 0.0;
  bool rest_exact = true;
  for (int n = 0; n < 200; ++n) {
    const FomState x{random_q(rng), random_qd(rng)};
    const FomState xp = impact_map(kModel, x);
    const Keypoints a = fk(kModel, x.q), b = fk(kModel, xp.q);
    const Vec2 s = a.swing_foot;
    pose_err = std::max({pose_err, (b.stance_knee + s - a.swing_knee).norm(), (b.hip + s - a.hip).norm(),
                         (b.torso_tip + s - a.torso_tip).norm(), (b.swing_knee + s - a.stance_knee).norm(),
                         (b.swing_foot + s - a.pivot).norm()});
    const double before = oracle_angular_momentum(kModel, x, pose(kModel, x.q).foot);
    const double after = oracle_angular_momentum(kModel, xp, {0.0, 0.0});
    mom_err = std::max(mom_err, std::abs(after - before) / std::max(1.0, std::abs(before)));

    const FomState still = impact_map(kModel, FomState{x.q, Vec5::Zero()});
    rest_exact = rest_exact && still.qd == Vec5::Zero() && still.q == relabel(x.q);
  }
  return {rest_exact && pose_err < 1e-10 && mom_err < 1e-8,
          fmt("rest state exact %s, pose err %.1e m, momentum rel err %.1e", rest_exact ? "yes" : "no", pose_err,
              mom_err)};
}

Outcome hlip() {
  const HlipParams p{};
  const RowVec2 k = deadbeat_gain(p);
  const Mat2 acl = closed_loop_matrix(p, k);
  const double nil = (acl * acl).cwiseAbs().rowwise().sum().maxCoeff();

  const StepPolicy pol = make_policy(p, 1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  double two_step = 0.0;
  bool exactly_two = true;
  for (int n = 0; n < 100; ++n) {
    Vec2 r = pol.r_star + Vec2(u(rng), 2 * u(rng));
    r = s2s_step(p, pol, r).next;
    exactly_two = exactly_two && (r - pol.r_star).norm() >= 1e-8;
    r = s2s_step(p, pol, r).next;
    two_step = std::max(two_step, (r - pol.r_star).norm());
  }

  Mat2 a;
  a << 0, 1, p.gravity / p.z0, 0;
  double flow_err = 0.0;
  for (int n = 0; n < 10; ++n) {
    Vec2 r(u(rng), 2 * u(rng));
    const Vec2 exact = ssp_flow(p, r, 0.3);
    const double h = 1e-5;
    for (int i = 0; i < 30000; ++i) {
      const Vec2 k1 = a * r, k2 = a * (r + 0.5 * h * k1), k3 = a * (r + 0.5 * h * k2), k4 = a * (r + h * k3);
      r += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    flow_err = std::max(flow_err, (exact - r).norm());
  }

  Vec2 r = pol.r_star;
  double travel = 0.0;
  for (int i = 0; i < 50; ++i) {
    const S2SStep s = s2s_step(p, pol, r);
    const Vec2 post = r - Vec2(s.ell, 0.0);
    travel += ssp_flow(p, post, p.t_ssp)(0) - post(0);
    r = s.next;
  }
  const double vel_err = std::abs(travel / (50 * p.t_ssp) - 1.0);
  // A perturbation along the null space of A_cl would settle in one step;
  // the random draws never hit it, so "exactly two" is checked as well.
  const bool pass = nil < 1e-10 && two_step < 1e-8 && exactly_two && flow_err < 1e-9 && vel_err < 1e-9;
  return {pass, fmt("|A_cl^2| %.1e, 2-step err %.1e, flow vs RK4 %.1e, mean velocity err %.1e", nil, two_step,
                    flow_err, vel_err)};
}

Outcome walking() {
  Reference& ref = reference();
  const WalkTrace& w = ref.walk;
  if (!w.completed) return {false, "walk failed after " + std::to_string(w.records.size()) + " steps: " + w.failure};
  write_walk(ref.sc.output_dir, kModel, w);

  // Phase portrait read back from the emitted CSV.
  const CsvTable zd = read_csv(fs::path(ref.sc.output_dir) / "zero_dynamics.csv");
  const int cs = zd.column("step"), c1 = zd.column("z1"), c2 = zd.column("z1dot");
  std::vector<std::vector<Vec2>> cycles(w.records.size());
  for (const auto& row : zd.rows) cycles[static_cast<size_t>(row[cs])].emplace_back(row[c1], row[c2]);
  const double closure = cycle_closure(cycles, 3);

  const WalkSummary s = summarize_walk(w);
  double dmin = 1e9, dmax = 0.0;
  for (const auto& r : w.records) {
    dmin = std::min(dmin, r.duration);
    dmax = std::max(dmax, r.duration);
  }
  const bool pass = s.steps == 30 && std::abs(s.mean_velocity - 1.0) <= 0.1 && dmin >= 0.24 && dmax <= 0.36 &&
                    closure < 0.05 && ref.seconds < 60.0;
  return {pass, fmt("%d steps, mean velocity %.4f m/s, durations [%.4f, %.4f] s, cycle closure %.2e, sim %.1f s",
                    s.steps, s.mean_velocity, dmin, dmax, closure, ref.seconds)};
}

Outcome neighborhood() {
  Reference& ref = reference();
  if (!ref.walk.completed) return {false, "walk failed"};
  const WalkAnalysis a = analyze_walk(ref.setup.controller.embedding(), ref.walk);
  const bool pass = std::isfinite(a.orbit.max) && a.disturbance_bounded;
  return {pass, fmt("orbit distance max %.4f mean %.4f, last-10 |d| max %.5f vs median %.5f", a.orbit.max,
                    a.orbit.mean, a.window_max_d, a.window_median_d)};
}

std::optional<OrbitReport> fixed_point_report;

Outcome poincare_stability() {
  Reference& ref = reference();
  if (!ref.walk.completed) return {false, "walk failed"};
  const ReturnMap map = [&](const FomState& x) {
    return poincare(kModel, ref.setup.controller, x, ref.sc.guard, ref.sc.integrator);
  };
  const OrbitReport r = find_fixed_point(map, kModel, ref.walk.final_state());
  fixed_point_report = r;
  const double one_step = (map(r.x_star).stacked() - r.x_star.stacked()).norm();
  bool all_inside = r.eigen_magnitudes.size() == 9;
  for (double m : r.eigen_magnitudes) all_inside = all_inside && m < 1.0;
  const Vec2 z = phi_z(kModel, r.x_star);
  const Vec2 zr = ref.setup.controller.embedding().xi().forward(ref.setup.policy.r_star);
  return {r.residual < 1e-8 && all_inside && one_step < 1e-4,
          fmt("residual %.1e in %d iterations, max |lambda| %.4f, one-step deviation %.1e; z(x*) = (%.4f, %.3f) vs "
              "Xi(r*) = (%.4f, %.3f)",
              r.residual, r.iterations, r.eigen_magnitudes.front(), one_step, z(0), z(1), zr(0), zr(1))};
}

Outcome eiss() {
  Scenario sc = walk_scenario();
  sc.initial.kind = InitialCondition::Kind::Random;
  sc.initial.magnitude = 0.05;
  const Setup setup = build_setup(sc);
  const Embedding& em = setup.controller.embedding();
  bool all = true;
  double best_alpha = 1.0, worst_alpha = 0.0, worst_alpha_fom = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    sc.seed = seed;
    const FomState x0 = initial_state(sc, em);
    const WalkTrace w = simulate_walk(kModel, setup.controller, x0, sc.n_steps, sc.guard, sc.integrator);
    if (!w.completed) return {false, fmt("seed %d fell: %s", static_cast<int>(seed), w.failure.c_str())};
    const WalkAnalysis a = analyze_walk(em, w);
    all = all && a.iss && a.iss->contracting && a.iss->bound_holds;
    best_alpha = std::min(best_alpha, a.iss ? a.iss->alpha : 1.0);
    worst_alpha = std::max(worst_alpha, a.iss ? a.iss->alpha : 1.0);
    // Informative: the same fit around the biped's own fixed point.
    if (fixed_point_report) {
      const IssReport f = fit_eiss(pre_impact_z(kModel, w), phi_z(kModel, fixed_point_report->x_star));
      worst_alpha_fom = std::max(worst_alpha_fom, f.alpha);
    }
  }

  // Perturbation sweep: gamma against |d|_inf.
  std::vector<double> dsup, gamma;
  for (double m : {0.0, 0.01, 0.02, 0.03, 0.04, 0.05}) {
    Scenario p = walk_scenario();
    p.initial.dz = Vec2(m, m);
    const FomState x0 = initial_state(p, em);
    const WalkTrace w = simulate_walk(kModel, setup.controller, x0, p.n_steps, p.guard, p.integrator);
    if (!w.completed) return {false, fmt("sweep point %.2f fell", m)};
    const WalkAnalysis a = analyze_walk(em, w);
    dsup.push_back(a.disturbance.sup);
    gamma.push_back(a.iss->gamma);
  }
  const double rho = rank_correlation(dsup, gamma);
  return {all && rho > 0.0,
          fmt("10 starts: alpha %.3f..%.3f, bound holds %s; "
              "around z(x*): alpha max %.3f; sweep |d|_inf %.9f..%.9f, gamma %.9f..%.9f, rank corr %.2f",
              best_alpha, worst_alpha, all ? "yes" : "no", worst_alpha_fom, dsup.front(), dsup.back(), gamma.front(),
              gamma.back(), rho)};
}

Outcome invariance() {
  Scenario sc = walk_scenario();
  sc.controller.mode = ControlMode::Invariance;
  const Setup inv = build_setup(sc);
  FomState xp = impact_map(kModel, initial_state(sc, inv.controller.embedding()));
  for (int i = 0; i < 3; ++i) xp = inv.controller.project(xp, 0.0, inv.controller.begin_step(xp));
  const StepTrace tr = integrate_step(kModel, inv.controller, xp, sc.guard, sc.integrator);
  double hmax = 0.0;
  for (size_t i = 0; i < tr.states.size(); ++i)
    hmax = std::max(hmax, inv.controller.manifold_residual(tr.states[i], tr.times[i], tr.context).norm());

  // Output linearization from an off-manifold start, epsilon 1 then 0.5.
  std::vector<double> rates;
  for (double eps : {1.0, 0.5}) {
    Scenario io = walk_scenario();
    io.controller.mode = ControlMode::IoLinearization;
    io.controller.kp.setConstant(400.0);
    io.controller.kd.setConstant(40.0);
    io.controller.epsilon = eps;
    const Setup s = build_setup(io);
    const FomState x = impact_map(kModel, initial_state(io, s.controller.embedding()));
    const StepTrace t = integrate_step(kModel, s.controller, x, io.guard, io.integrator);
    std::vector<double> h;
    for (size_t i = 0; i < t.states.size(); ++i)
      h.push_back(s.controller.manifold_residual(t.states[i], t.times[i], t.context).norm());
    rates.push_back(decay_rate(t.times, h));
  }
  return {hmax < 1e-5 && rates[1] > rates[0],
          fmt("on-manifold max |h| %.1e; |h| decay rate %.2f (eps 1) -> %.2f (eps 0.5) 1/s", hmax, rates[0],
              rates[1])};
}

Outcome discrete_invariance() {
  Reference& ref = reference();
  if (!ref.walk.completed) return {false, "walk failed"};
  std::vector<double> r;
  for (const auto& rec : ref.walk.records) r.push_back(rec.invariance_residual);
  for (double v : r)
    if (!std::isfinite(v)) return {false, "non-finite residual"};
  // Least-squares slope over the second half of the walk.
  const size_t first = r.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(r.size() - first);
  for (size_t k = first; k < r.size(); ++k) {
    sx += k;
    sy += r[k];
    sxx += double(k) * k;
    sxy += k * r[k];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double mean = sy / n;
  const double growth = slope * n / mean;  // relative change across the window
  return {growth < 0.05, fmt("%zu residuals, first %.4f, last %.4f, mean %.4f, relative trend over last %d steps %.1e",
                             r.size(), r.front(), r.back(), mean, static_cast<int>(n), growth)};
}

}  // namespace

int main() {
  report(1, "dynamics", dynamics, 30.0);
  report(2, "impact", impacts);
  report(3, "hlip", hlip);
  report(4, "walking 1.0 m/s", walking, 60.0);
  report(5, "hzd neighborhood", neighborhood);
  report(6, "poincare stability", poincare_stability);
  report(7, "e-iss", eiss);
  report(8, "invariance controller", invariance);
  report(9, "discrete invariance", discrete_invariance);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures;
}
