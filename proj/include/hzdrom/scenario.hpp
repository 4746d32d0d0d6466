#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hzdrom/controller.hpp"
#include "hzdrom/hybrid.hpp"

namespace hzdrom {

struct InitialCondition {
  enum class Kind { Nominal, Perturbation, Random, State };
  Kind kind = Kind::Nominal;
  Vec2 dz = Vec2::Zero();   // Perturbation: added to z*
  double magnitude = 0.05;  // Random: uniform in [-magnitude, magnitude] per z coordinate
  FomState state;           // State: explicit pre-impact state
};

struct SweepSpec {
  std::string axis;  // c | perturbation | epsilon | kp
  std::vector<double> values;
};

/// Everything a CLI run needs, loaded from one JSON document.
struct Scenario {
  RobotModel robot = RobotModel::default_biped();
  HlipParams hlip;
  double command = 1.0;
  std::optional<RowVec2> gain;  // custom step gain; deadbeat otherwise
  EmbeddingConfig embedding;
  ControllerConfig controller;
  Guard guard;
  IntegratorOptions integrator;
  int n_steps = 30;
  InitialCondition initial;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int rom_samples = 101;
  SweepSpec sweep;

  /// Relative paths (robot_file) resolve against base_dir.
  static Scenario from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static Scenario load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;
};

/// The controller stack for a scenario.
struct Setup {
  StepPolicy policy;
  ZeroDynamicsController controller;
};

Setup build_setup(const Scenario& sc);

/// Pre-impact initial state on the section for the scenario's initial spec.
FomState initial_state(const Scenario& sc, const Embedding& embedding);

}  // namespace hzdrom
