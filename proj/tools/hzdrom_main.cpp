#include <iostream>

#include <CLI11.hpp>

#include "hzdrom/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hybrid zero dynamics walking with an HLIP step planner"};
  app.require_subcommand(1);

  hzdrom::CliOptions opts;
  std::string out;
  int steps = 0;
  std::uint64_t seed = 0;

  const char* verbs[][2] = {
      {"simulate", "simulate a walk and write traces and phase portraits"},
      {"rom", "write the HLIP orbit and the step-to-step convergence table"},
      {"find-orbit", "Newton search for the periodic gait and its Poincare eigenvalues"},
      {"analyze", "disturbance sequence, E-ISS fit and orbit distance of a walk"},
      {"sweep", "repeat the walk over the scenario's sweep axis"},
  };
  for (const auto& v : verbs) {
    CLI::App* sub = app.add_subcommand(v[0], v[1]);
    sub->add_option("--config", opts.config, "scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--steps", steps, "number of steps (overrides n_steps)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "seed for random initial conditions");
    sub->add_flag("--fixed-step", opts.fixed_step, "fixed-step RK4 for reproducible output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hzdrom::kExitConfig;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out")) opts.out = out;
  if (sub->count("--steps")) opts.steps = steps;
  if (sub->count("--seed")) opts.seed = seed;
  return hzdrom::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
