#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hzdrom/analysis.hpp"
#include "hzdrom/scenario.hpp"

namespace hzdrom {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSimulation = 3,
  kExitAnalysis = 4,
};

/// RK4 step used by --fixed-step when the scenario does not set one.
inline constexpr double kDefaultFixedStep = 2.5e-4;

struct CliOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  bool fixed_step = false;
};

/// Loads the scenario and applies command-line overrides.
Scenario scenario_from_options(const CliOptions& opts);

struct WalkSummary {
  int steps = 0;
  bool completed = false;
  std::string failure;
  /// Over the last `window` steps: travelled distance over elapsed time.
  double mean_velocity = 0.0;
  double mean_duration = 0.0;
  double min_duration = 0.0;
  double max_duration = 0.0;
};

WalkSummary summarize_walk(const WalkTrace& walk, int window = 10);

/// One (z1, dz1/dt) curve per step.
std::vector<std::vector<Vec2>> phase_cycles(const WalkTrace& walk);
/// (z1, z2) samples of the last `window` steps.
std::vector<Vec2> steady_z_trace(const RobotModel& model, const WalkTrace& walk, int window = 10);
/// Xi applied to samples of the ROM period-one orbit.
std::vector<Vec2> rom_orbit_z(const Embedding& embedding, int samples);

/// Writes trace.csv, zero_dynamics.csv, actuated.csv and steps.csv.
void write_walk(const std::filesystem::path& dir, const RobotModel& model, const WalkTrace& walk);

struct WalkAnalysis {
  Vec2 z_star = Vec2::Zero();
  Disturbance disturbance;
  std::vector<double> errors;  // |z_k^- - z*|, initial state first
  std::optional<IssReport> iss;
  OrbitDistance orbit;
  /// max |d_k| <= 2 median |d_k| over the window.
  bool disturbance_bounded = false;
  double window_max_d = 0.0;
  double window_median_d = 0.0;
};

WalkAnalysis analyze_walk(const Embedding& embedding, const WalkTrace& walk, int window = 10, int rom_samples = 101);

nlohmann::json orbit_report_to_json(const OrbitReport& report);
OrbitReport orbit_report_from_json(const nlohmann::json& doc);

int cmd_simulate(const Scenario& sc, std::ostream& log);
int cmd_rom(const Scenario& sc, std::ostream& log);
int cmd_find_orbit(const Scenario& sc, std::ostream& log);
int cmd_analyze(const Scenario& sc, std::ostream& log);
int cmd_sweep(const Scenario& sc, std::ostream& log);

/// Runs a verb, mapping failures to exit codes. Diagnostics go to err.
int run_command(const std::string& verb, const CliOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace hzdrom
