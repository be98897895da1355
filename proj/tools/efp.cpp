#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efp/harness.hpp"

namespace {

using efp::harness::Overrides;

template <class T>
void opt(CLI::App* app, const std::string& name, std::optional<T>& slot, const std::string& help) {
  app->add_option_function<T>(name, [&slot](const T& v) { slot = v; }, help);
}

void add_common(CLI::App* app, Overrides& o, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file (sections problem, solver, trials, sweep, output)")
      ->check(CLI::ExistingFile);
  opt(app, "--problem", o.problem, "poisson | heat | burgers");
  opt(app, "--nx", o.nx, "nodes along x");
  opt(app, "--ny", o.ny, "nodes along y (time for heat and Burgers)");
  opt(app, "--nu", o.nu, "Burgers viscosity");
  opt(app, "--alpha", o.alpha, "heat diffusivity");
  opt(app, "--y-extent", o.y_extent, "length of the y axis");
  opt(app, "--seed", o.seed, "base seed");
  app->add_option_function<std::vector<std::uint64_t>>(
         "--seeds", [&o](const std::vector<std::uint64_t>& v) { o.seeds = v; }, "explicit seed list")
      ->delimiter(',');
  opt(app, "--trials", o.trials, "number of seeds, counting up from --seed");
  opt(app, "--workers", o.workers, "concurrent trials (0: hardware threads)");
  opt(app, "--dtau", o.dtau, "pseudo-time step");
  opt(app, "--eps0", o.eps0, "initial noise intensity");
  opt(app, "--eps-decay", o.eps_decay, "noise decay factor per iteration");
  opt(app, "--sigma-init", o.sigma_init, "initial random field amplitude");
  opt(app, "--sigma-smooth", o.sigma_smooth, "smoothing width in nodes");
  opt(app, "--smooth-decay", o.smooth_decay, "smoothing width decay factor per iteration");
  opt(app, "--max-iters", o.max_iters, "outer iteration cap");
  opt(app, "--residual-tol", o.residual_tol, "relative residual stopping tolerance");
  opt(app, "--cg-tol", o.cg_tol, "inner CG tolerance");
  app->add_flag("--no-smoothing", o.no_smoothing, "disable Gaussian smoothing");
  app->add_flag("--no-boundary", o.no_boundary, "disable boundary handling");
  opt(app, "--out", o.out, "output directory (default $EFP_OUT_DIR, then ./efp_out)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized energy-driven solver for Poisson, heat and Burgers problems"};
  app.set_version_flag("--version", EFP_VERSION);
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  add_common(app.add_subcommand("solve", "single solve; writes fields and history"), overrides, config_path);
  add_common(app.add_subcommand("ablation", "smoothing x boundary on/off from one seed"), overrides, config_path);
  auto* sweep = app.add_subcommand("sweep", "Burgers trials over a list of viscosities");
  add_common(sweep, overrides, config_path);
  sweep->add_option_function<std::vector<double>>(
           "--nu-list", [&overrides](const std::vector<double>& v) { overrides.nu_list = v; }, "viscosities")
      ->delimiter(',');
  add_common(app.add_subcommand("trials", "repeated solves over seeds with statistics"), overrides, config_path);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  using namespace efp::harness;
  const Command cmd = parse_command(app.get_subcommands().front()->get_name());
  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
    apply_overrides(cfg, overrides);
  } catch (const ConfigError& e) {
    std::cerr << "efp: invalid configuration: " << e.what() << '\n';
    return 2;
  }
  return run_command(cmd, cfg, std::cout, std::cerr);
}
