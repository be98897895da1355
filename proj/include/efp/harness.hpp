#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "efp/field_io.hpp"
#include "efp/metrics.hpp"
#include "efp/problems.hpp"
#include "efp/solver.hpp"
#include "efp/trials.hpp"

#ifndef EFP_VERSION
#define EFP_VERSION "unknown"
#endif

namespace efp::harness {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kHistoryHeader = "iter,energy,residual_norm,rel_l2_error,eps";
inline constexpr const char* kSweepHeader = "nu,mean_error_pct,std_error_pct,mean_time_s";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { Solve, Ablation, Sweep, Trials };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::Solve: return "solve";
    case Command::Ablation: return "ablation";
    case Command::Sweep: return "sweep";
    case Command::Trials: return "trials";
  }
  return "unknown";
}

inline Command parse_command(const std::string& name) {
  if (name == "solve") return Command::Solve;
  if (name == "ablation") return Command::Ablation;
  if (name == "sweep") return Command::Sweep;
  if (name == "trials") return Command::Trials;
  throw ConfigError("unknown command '" + name + "'");
}

struct ProblemConfig {
  std::optional<ProblemKind> kind;  // unset: command default
  std::size_t nx = 64;
  std::size_t ny = 64;
  double alpha = kDefaultAlpha;
  double nu = 0.1;
  double y_extent = 1.0;
};

/// Either an explicit seed list or `count` seeds starting at `base_seed`.
struct TrialPlan {
  std::vector<std::uint64_t> seeds;
  std::size_t count = 10;
  std::uint64_t base_seed = 1;
  unsigned workers = 0;  // 0: one per hardware thread

  std::vector<std::uint64_t> resolved() const { return seeds.empty() ? seed_range(base_seed, count) : seeds; }

  unsigned resolved_workers() const {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

struct ExperimentConfig {
  ProblemConfig problem;
  SolverConfig solver;
  TrialPlan trials;
  std::vector<double> sweep_nu{0.01, 0.05, 0.1};
  std::string out_dir;
};

/// Command-line values; anything set here wins over the config file.
struct Overrides {
  std::optional<std::string> problem;
  std::optional<std::size_t> nx, ny;
  std::optional<double> nu, alpha, y_extent;
  std::optional<std::vector<double>> nu_list;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::size_t> trials;
  std::optional<unsigned> workers;
  std::optional<double> dtau, eps0, eps_decay, sigma_init, sigma_smooth, smooth_decay;
  std::optional<int> max_iters;
  std::optional<double> residual_tol, cg_tol;
  bool no_smoothing = false;
  bool no_boundary = false;
  std::optional<std::string> out;
};

inline ProblemKind default_kind(Command c) { return c == Command::Sweep ? ProblemKind::Burgers : ProblemKind::Poisson; }

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

namespace detail {

inline const nlohmann::json* section(const nlohmann::json& root, const char* name,
                                     std::initializer_list<const char*> allowed) {
  if (!root.contains(name)) return nullptr;
  const auto& s = root.at(name);
  if (!s.is_object()) throw ConfigError(std::string("config section '") + name + "' must be an object");
  for (const auto& [key, _] : s.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string("unknown key '") + key + "' in config section '" + name + "'");
  }
  return &s;
}

template <class T>
void read(const nlohmann::json* s, const char* key, T& out) {
  if (s == nullptr || !s->contains(key)) return;
  try {
    out = s->at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Parse a JSON config with optional sections problem, solver, trials, sweep
/// and output. Unknown sections or keys are errors.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : root.items()) {
    if (key != "problem" && key != "solver" && key != "trials" && key != "sweep" && key != "output") {
      throw ConfigError("unknown config section '" + key + "'");
    }
  }
  ExperimentConfig cfg;

  const auto* p = detail::section(root, "problem", {"kind", "nx", "ny", "alpha", "nu", "y_extent"});
  if (p && p->contains("kind")) {
    std::string kind;
    detail::read(p, "kind", kind);
    try {
      cfg.problem.kind = parse_problem_kind(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  detail::read(p, "nx", cfg.problem.nx);
  detail::read(p, "ny", cfg.problem.ny);
  detail::read(p, "alpha", cfg.problem.alpha);
  detail::read(p, "nu", cfg.problem.nu);
  detail::read(p, "y_extent", cfg.problem.y_extent);

  const auto* s = detail::section(root, "solver",
                                  {"dtau", "eps0", "eps_decay", "sigma_init", "sigma_smooth", "smooth_decay",
                                   "smoothing", "boundary", "max_iters", "residual_tol", "cg_tol", "cg_max_iters"});
  auto& sv = cfg.solver;
  detail::read(s, "dtau", sv.dtau);
  detail::read(s, "eps0", sv.eps0);
  detail::read(s, "eps_decay", sv.eps_decay);
  detail::read(s, "sigma_init", sv.sigma_init);
  detail::read(s, "sigma_smooth", sv.sigma_smooth);
  detail::read(s, "smooth_decay", sv.smooth_decay);
  detail::read(s, "smoothing", sv.smoothing_enabled);
  detail::read(s, "boundary", sv.boundary_enabled);
  detail::read(s, "max_iters", sv.max_iters);
  detail::read(s, "residual_tol", sv.residual_tol);
  detail::read(s, "cg_tol", sv.cg_tol);
  detail::read(s, "cg_max_iters", sv.cg_max_iters);

  const auto* t = detail::section(root, "trials", {"seeds", "count", "base_seed", "workers"});
  detail::read(t, "seeds", cfg.trials.seeds);
  detail::read(t, "count", cfg.trials.count);
  detail::read(t, "base_seed", cfg.trials.base_seed);
  detail::read(t, "workers", cfg.trials.workers);

  const auto* w = detail::section(root, "sweep", {"nu"});
  detail::read(w, "nu", cfg.sweep_nu);

  const auto* o = detail::section(root, "output", {"dir"});
  detail::read(o, "dir", cfg.out_dir);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return parse_config(root);
}

inline void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.problem) {
    try {
      cfg.problem.kind = parse_problem_kind(*o.problem);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.nx) cfg.problem.nx = *o.nx;
  if (o.ny) cfg.problem.ny = *o.ny;
  if (o.nu) cfg.problem.nu = *o.nu;
  if (o.alpha) cfg.problem.alpha = *o.alpha;
  if (o.y_extent) cfg.problem.y_extent = *o.y_extent;
  if (o.nu_list) cfg.sweep_nu = *o.nu_list;

  if (o.seeds && o.trials && *o.trials != o.seeds->size()) {
    throw ConfigError("--trials " + std::to_string(*o.trials) + " disagrees with " +
                      std::to_string(o.seeds->size()) + " seeds given by --seeds");
  }
  if (o.seed) {
    cfg.trials.base_seed = *o.seed;
    cfg.trials.seeds.clear();
  }
  if (o.trials) {
    cfg.trials.count = *o.trials;
    cfg.trials.seeds.clear();
  }
  if (o.seeds) cfg.trials.seeds = *o.seeds;
  if (o.workers) cfg.trials.workers = *o.workers;

  auto& s = cfg.solver;
  if (o.dtau) s.dtau = *o.dtau;
  if (o.eps0) s.eps0 = *o.eps0;
  if (o.eps_decay) s.eps_decay = *o.eps_decay;
  if (o.sigma_init) s.sigma_init = *o.sigma_init;
  if (o.sigma_smooth) s.sigma_smooth = *o.sigma_smooth;
  if (o.smooth_decay) s.smooth_decay = *o.smooth_decay;
  if (o.max_iters) s.max_iters = *o.max_iters;
  if (o.residual_tol) s.residual_tol = *o.residual_tol;
  if (o.cg_tol) s.cg_tol = *o.cg_tol;
  if (o.no_smoothing) s.smoothing_enabled = false;
  if (o.no_boundary) s.boundary_enabled = false;
  if (o.out) cfg.out_dir = *o.out;
}

/// Output directory precedence: flag or config file, then EFP_OUT_DIR, then
/// "efp_out".
inline void resolve_out_dir(ExperimentConfig& cfg) {
  if (!cfg.out_dir.empty()) return;
  const char* env = std::getenv("EFP_OUT_DIR");
  cfg.out_dir = (env != nullptr && *env != '\0') ? env : "efp_out";
}

inline ProblemSpec make_problem(const ProblemConfig& p, ProblemKind kind, double nu) {
  const GridKind gk = kind == ProblemKind::Poisson ? GridKind::Spatial2D : GridKind::SpaceTime1Dp1;
  auto grid = make_grid(gk, p.nx, p.ny, p.y_extent);
  switch (kind) {
    case ProblemKind::Poisson: return make_poisson(grid);
    case ProblemKind::Heat: return make_heat(grid, p.alpha);
    case ProblemKind::Burgers: return make_burgers(grid, nu);
  }
  throw ConfigError("unknown problem kind");
}

/// Throws ConfigError describing the first violated constraint.
inline void validate(const ExperimentConfig& cfg, Command cmd) {
  const auto& p = cfg.problem;
  const ProblemKind kind = p.kind.value_or(default_kind(cmd));
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw ConfigError("alpha must be > 0");
  if (!(p.nu > 0.0) || !std::isfinite(p.nu)) throw ConfigError("nu must be > 0");
  try {
    cfg.solver.validate();
    make_grid(GridKind::Spatial2D, p.nx, p.ny, p.y_extent);
    if (kind == ProblemKind::Poisson) laplacian_2d(make_grid(GridKind::Spatial2D, p.nx, p.ny, p.y_extent));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const auto seeds = cfg.trials.resolved();
  if (seeds.empty()) throw ConfigError("the seed list is empty");
  if (cmd == Command::Trials && seeds.size() < 2) {
    throw ConfigError("trials needs at least 2 seeds, got " + std::to_string(seeds.size()));
  }
  if (cmd == Command::Sweep) {
    if (kind != ProblemKind::Burgers) throw ConfigError("sweep runs Burgers problems only");
    if (cfg.sweep_nu.empty()) throw ConfigError("sweep needs at least one nu");
    for (double nu : cfg.sweep_nu) {
      if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("sweep nu values must be > 0");
    }
  }
}

inline nlohmann::json to_json(const ExperimentConfig& cfg, Command cmd) {
  const auto& p = cfg.problem;
  const auto& s = cfg.solver;
  return nlohmann::json{
      {"problem",
       {{"kind", to_string(p.kind.value_or(default_kind(cmd)))},
        {"nx", p.nx},
        {"ny", p.ny},
        {"alpha", p.alpha},
        {"nu", p.nu},
        {"y_extent", p.y_extent}}},
      {"solver",
       {{"dtau", s.dtau},
        {"eps0", s.eps0},
        {"eps_decay", s.eps_decay},
        {"sigma_init", s.sigma_init},
        {"sigma_smooth", s.sigma_smooth},
        {"smooth_decay", s.smooth_decay},
        {"smoothing", s.smoothing_enabled},
        {"boundary", s.boundary_enabled},
        {"max_iters", s.max_iters},
        {"residual_tol", s.residual_tol},
        {"cg_tol", s.cg_tol},
        {"cg_max_iters", s.cg_max_iters}}},
      {"trials", {{"seeds", cfg.trials.resolved()}, {"workers", cfg.trials.resolved_workers()}}},
      {"sweep", {{"nu", cfg.sweep_nu}}},
      {"output", {{"dir", cfg.out_dir}}}};
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out + "\"";
}

inline void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history) {
  os << kHistoryHeader << '\n';
  for (const auto& r : history) {
    os << r.iter << ',' << format_double(r.energy) << ',' << format_double(r.residual_norm) << ','
       << format_double(r.rel_l2_error) << ',' << format_double(r.eps) << '\n';
  }
}

/// Writes files under one directory and remembers their names for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  const std::filesystem::path& path() const { return dir_; }

  template <class Writer>
  void write(const std::string& name, Writer&& writer) {
    std::ofstream os(dir_ / name);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    writer(os);
    if (!os) throw std::runtime_error("error writing " + (dir_ / name).string());
    files_.push_back(name);
  }

  void write_manifest(Command cmd, const ExperimentConfig& cfg, bool ok, const nlohmann::json& results) {
    nlohmann::json m{{"schema_version", kManifestSchemaVersion},
                     {"version", EFP_VERSION},
                     {"command", to_string(cmd)},
                     {"status", ok ? "ok" : "failed"},
                     {"config", to_json(cfg, cmd)},
                     {"out_dir", std::filesystem::absolute(dir_).string()},
                     {"files", files_},
                     {"results", results}};
    files_.push_back("manifest.json");
    m["files"] = files_;
    std::ofstream os(dir_ / "manifest.json");
    os << m.dump(2) << '\n';
    if (!os) throw std::runtime_error("error writing manifest");
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

inline std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline nlohmann::json result_json(const SolveResult& r, const ProblemSpec& problem) {
  return nlohmann::json{{"seed", r.seed},
                        {"rel_l2_error_pct", relative_l2_error(r.final_u, problem.exact_u)},
                        {"mse", mse(r.final_u, problem.exact_u)},
                        {"iterations", r.history.size()},
                        {"stop_reason", to_string(r.reason)},
                        {"initial_residual_norm", r.initial_residual_norm},
                        {"final_residual_norm", r.history.empty() ? r.initial_residual_norm
                                                                  : r.history.back().residual_norm},
                        {"wall_time_s", r.wall_time},
                        {"total_cg_iterations", r.total_cg_iterations},
                        {"cg_cap_hits", r.cg_cap_hits}};
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_solve(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const ProblemKind kind = cfg.problem.kind.value_or(default_kind(Command::Solve));
  const ProblemSpec problem = make_problem(cfg.problem, kind, cfg.problem.nu);
  SolverConfig solver = cfg.solver;
  solver.seed = cfg.trials.resolved().front();

  OutputDir dir(cfg.out_dir);
  std::optional<SolveResult> result;
  std::string failure;
  try {
    result = run_solver(problem, solver);
  } catch (const SolverAborted& e) {
    failure = e.what();
    result = e.partial();
  }
  const SolveResult& r = *result;
  Field abs_error = r.final_u - problem.exact_u;
  for (double& v : abs_error.values()) v = std::abs(v);

  dir.write("final_u.csv", [&](std::ostream& os) { write_csv(os, r.final_u, true); });
  dir.write("exact_u.csv", [&](std::ostream& os) { write_csv(os, problem.exact_u, true); });
  dir.write("abs_error.csv", [&](std::ostream& os) { write_csv(os, abs_error, true); });
  dir.write("history.csv", [&](std::ostream& os) { write_history_csv(os, r.history); });
  auto results = result_json(r, problem);
  if (!failure.empty()) results["error"] = failure;
  dir.write_manifest(Command::Solve, cfg, failure.empty(), results);

  if (!failure.empty()) {
    err << "efp: solve aborted: " << failure << '\n';
    return 1;
  }
  out << to_string(kind) << ' ' << cfg.problem.nx << 'x' << cfg.problem.ny << " seed " << r.seed
      << ": rel_l2_error " << format_fixed(relative_l2_error(r.final_u, problem.exact_u), 4) << "%, "
      << r.history.size() << " iterations (" << to_string(r.reason) << "), " << format_fixed(r.wall_time, 2)
      << " s\n";
  return 0;
}

inline int cmd_ablation(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const ProblemKind kind = cfg.problem.kind.value_or(default_kind(Command::Ablation));
  const ProblemSpec problem = make_problem(cfg.problem, kind, cfg.problem.nu);
  const std::uint64_t seed = cfg.trials.resolved().front();

  struct Cell {
    bool smoothing;
    bool boundary;
    std::string name;
  };
  const std::vector<Cell> cells{{true, true, "smooth_on_boundary_on"},
                                {false, true, "smooth_off_boundary_on"},
                                {true, false, "smooth_on_boundary_off"},
                                {false, false, "smooth_off_boundary_off"}};

  OutputDir dir(cfg.out_dir);
  std::ostringstream summary;
  summary << "cell,smoothing,boundary,status,initial_residual_norm,final_residual_norm,residual_drop,"
             "final_rel_l2_error,iterations,wall_time_s\n";
  nlohmann::json results = nlohmann::json::array();
  bool ok = true;
  for (const auto& cell : cells) {
    SolverConfig solver = cfg.solver;
    solver.seed = seed;
    solver.smoothing_enabled = cell.smoothing;
    solver.boundary_enabled = cell.boundary;
    std::optional<SolveResult> result;
    std::string failure;
    try {
      result = run_solver(problem, solver);
    } catch (const SolverAborted& e) {
      failure = e.what();
      result = e.partial();
      ok = false;
      err << "efp: ablation cell " << cell.name << " aborted: " << failure << '\n';
    }
    const SolveResult& r = *result;
    const double final_res = r.history.empty() ? r.initial_residual_norm : r.history.back().residual_norm;
    const double drop = final_res > 0.0 ? r.initial_residual_norm / final_res : INFINITY;
    const double error = relative_l2_error(r.final_u, problem.exact_u);
    dir.write("history_" + cell.name + ".csv", [&](std::ostream& os) { write_history_csv(os, r.history); });
    summary << cell.name << ',' << (cell.smoothing ? "on" : "off") << ',' << (cell.boundary ? "on" : "off") << ','
            << (failure.empty() ? "ok" : "failed") << ',' << format_double(r.initial_residual_norm) << ','
            << format_double(final_res) << ',' << format_double(drop) << ',' << format_double(error) << ','
            << r.history.size() << ',' << format_double(r.wall_time) << '\n';
    auto j = result_json(r, problem);
    j["cell"] = cell.name;
    j["residual_drop"] = drop;
    if (!failure.empty()) j["error"] = failure;
    results.push_back(j);
    out << cell.name << ": rel_l2_error " << format_fixed(error, 4) << "%, residual drop "
        << format_fixed(drop, 1) << "x, " << r.history.size() << " iterations\n";
  }
  dir.write("summary.csv", [&](std::ostream& os) { os << summary.str(); });
  dir.write_manifest(Command::Ablation, cfg, ok, results);
  return ok ? 0 : 1;
}

namespace detail {

inline void write_trial_row(std::ostream& os, const TrialOutcome& t, const ProblemSpec& problem) {
  if (t.ok()) {
    const auto& r = *t.result;
    os << t.seed << ",ok," << format_double(relative_l2_error(r.final_u, problem.exact_u)) << ','
       << format_double(r.wall_time) << ',' << r.history.size() << ",\n";
  } else {
    os << t.seed << ",failed,nan,nan,0," << csv_quote(t.error) << '\n';
  }
}

inline std::vector<TrialRecord> successful_records(const std::vector<TrialOutcome>& outcomes,
                                                   const ProblemSpec& problem) {
  std::vector<TrialRecord> records;
  for (const auto& t : outcomes) {
    if (t.ok()) records.push_back(make_trial_record(*t.result, problem));
  }
  return records;
}

}  // namespace detail

inline int cmd_trials(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const ProblemKind kind = cfg.problem.kind.value_or(default_kind(Command::Trials));
  const ProblemSpec problem = make_problem(cfg.problem, kind, cfg.problem.nu);
  const auto seeds = cfg.trials.resolved();

  OutputDir dir(cfg.out_dir);
  const auto outcomes = run_trials(problem, cfg.solver, seeds, cfg.trials.resolved_workers());

  std::vector<Field> finals;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& t = outcomes[i];
    if (t.ok()) {
      finals.push_back(t.result->final_u);
      dir.write("history_" + std::to_string(i) + "_seed" + std::to_string(t.seed) + ".csv",
                [&](std::ostream& os) { write_history_csv(os, t.result->history); });
    } else {
      ++failed;
      err << "efp: trial seed " << t.seed << " failed: " << t.error << '\n';
    }
  }
  dir.write("trials.csv", [&](std::ostream& os) {
    os << "seed,status,rel_l2_error,wall_time_s,iterations,message\n";
    for (const auto& t : outcomes) detail::write_trial_row(os, t, problem);
  });

  const auto records = detail::successful_records(outcomes, problem);
  const double distance = max_pairwise_relative_distance(finals);
  nlohmann::json results{{"trial_count", seeds.size()}, {"failed_count", failed},
                         {"max_pairwise_rel_distance", distance}};
  std::optional<TrialStats> stats;
  if (!records.empty()) {
    stats = aggregate_trials(records);
    results["mean_error_pct"] = stats->mean_rel_l2_error;
    results["std_error_pct"] = stats->std_rel_l2_error;
    results["mean_time_s"] = stats->mean_wall_time;
    out << to_string(kind) << ' ' << seeds.size() << " trials: mean error "
        << format_fixed(stats->mean_rel_l2_error, 4) << "% (std " << format_fixed(stats->std_rel_l2_error, 4)
        << "), mean time " << format_fixed(stats->mean_wall_time, 2) << " s, max pairwise distance "
        << format_double(distance) << '\n';
  }
  dir.write("summary.csv", [&](std::ostream& os) {
    os << "trial_count,failed_count,mean_error_pct,std_error_pct,mean_time_s,std_time_s,degenerate,"
          "max_pairwise_rel_distance\n";
    os << seeds.size() << ',' << failed << ',';
    if (stats) {
      os << format_double(stats->mean_rel_l2_error) << ',' << format_double(stats->std_rel_l2_error) << ','
         << format_double(stats->mean_wall_time) << ',' << format_double(stats->std_wall_time) << ','
         << (stats->degenerate ? 1 : 0);
    } else {
      os << "nan,nan,nan,nan,1";
    }
    os << ',' << format_double(distance) << '\n';
  });
  dir.write_manifest(Command::Trials, cfg, failed == 0, results);
  return failed == 0 ? 0 : 1;
}

inline int cmd_sweep(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto seeds = cfg.trials.resolved();
  OutputDir dir(cfg.out_dir);

  std::ostringstream summary, trials;
  summary << kSweepHeader << '\n';
  trials << "nu,seed,status,rel_l2_error,wall_time_s,iterations,message\n";
  nlohmann::json results = nlohmann::json::array();
  bool ok = true;
  for (double nu : cfg.sweep_nu) {
    const ProblemSpec problem = make_problem(cfg.problem, ProblemKind::Burgers, nu);
    const auto outcomes = run_trials(problem, cfg.solver, seeds, cfg.trials.resolved_workers());
    for (const auto& t : outcomes) {
      trials << format_double(nu) << ',';
      detail::write_trial_row(trials, t, problem);
      if (!t.ok()) {
        ok = false;
        err << "efp: nu " << nu << " seed " << t.seed << " failed: " << t.error << '\n';
      }
    }
    const auto records = detail::successful_records(outcomes, problem);
    if (records.empty()) {
      summary << format_double(nu) << ",nan,nan,nan\n";
      results.push_back({{"nu", nu}, {"trial_count", 0}, {"failed_count", outcomes.size()}});
      continue;
    }
    const TrialStats stats = aggregate_trials(records);
    summary << format_double(nu) << ',' << format_double(stats.mean_rel_l2_error) << ','
            << format_double(stats.std_rel_l2_error) << ',' << format_double(stats.mean_wall_time) << '\n';
    results.push_back({{"nu", nu},
                       {"trial_count", stats.trial_count},
                       {"failed_count", outcomes.size() - records.size()},
                       {"mean_error_pct", stats.mean_rel_l2_error},
                       {"std_error_pct", stats.std_rel_l2_error},
                       {"mean_time_s", stats.mean_wall_time},
                       {"degenerate", stats.degenerate}});
    out << "nu " << nu << ": mean error " << format_fixed(stats.mean_rel_l2_error, 4) << "% (std "
        << format_fixed(stats.std_rel_l2_error, 4) << ") over " << stats.trial_count << " trials, mean time "
        << format_fixed(stats.mean_wall_time, 2) << " s\n";
  }
  dir.write("summary.csv", [&](std::ostream& os) { os << summary.str(); });
  dir.write("trials.csv", [&](std::ostream& os) { os << trials.str(); });
  dir.write_manifest(Command::Sweep, cfg, ok, results);
  return ok ? 0 : 1;
}

/// Validate, then dispatch. Validation failures return 2 before anything is
/// written; run failures return 1.
inline int run_command(Command cmd, ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  try {
    resolve_out_dir(cfg);
    validate(cfg, cmd);
  } catch (const ConfigError& e) {
    err << "efp: invalid configuration: " << e.what() << '\n';
    return 2;
  }
  try {
    switch (cmd) {
      case Command::Solve: return cmd_solve(cfg, out, err);
      case Command::Ablation: return cmd_ablation(cfg, out, err);
      case Command::Sweep: return cmd_sweep(cfg, out, err);
      case Command::Trials: return cmd_trials(cfg, out, err);
    }
  } catch (const std::exception& e) {
    err << "efp: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace efp::harness
