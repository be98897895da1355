#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "efp/harness.hpp"

using namespace efp;
using namespace efp::harness;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("efp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun run_cli(const std::string& args, const fs::path& scratch, const std::string& env = "") {
  const fs::path out = scratch / "stdout.txt";
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = env + " \"" EFP_CLI_PATH "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

}  // namespace

// ----- Config handling --------------------------------------------------------

TEST(Config, DefaultsAndSections) {
  const auto cfg = parse_config(nlohmann::json::parse(R"({
    "problem": {"kind": "heat", "nx": 20, "ny": 24, "alpha": 0.2},
    "solver": {"dtau": 0.5, "smoothing": false, "max_iters": 50},
    "trials": {"count": 4, "base_seed": 10, "workers": 2},
    "sweep": {"nu": [0.2, 0.3]},
    "output": {"dir": "somewhere"}
  })"));
  EXPECT_EQ(cfg.problem.kind, ProblemKind::Heat);
  EXPECT_EQ(cfg.problem.nx, 20u);
  EXPECT_EQ(cfg.problem.ny, 24u);
  EXPECT_DOUBLE_EQ(cfg.problem.alpha, 0.2);
  EXPECT_DOUBLE_EQ(cfg.solver.dtau, 0.5);
  EXPECT_FALSE(cfg.solver.smoothing_enabled);
  EXPECT_TRUE(cfg.solver.boundary_enabled);
  EXPECT_EQ(cfg.solver.max_iters, 50);
  EXPECT_EQ(cfg.trials.resolved(), (std::vector<std::uint64_t>{10, 11, 12, 13}));
  EXPECT_EQ(cfg.trials.resolved_workers(), 2u);
  EXPECT_EQ(cfg.sweep_nu, (std::vector<double>{0.2, 0.3}));
  EXPECT_EQ(cfg.out_dir, "somewhere");
}

TEST(Config, UnknownKeysAndBadTypesRejected) {
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"solver": {"dtua": 1}})")), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"solvers": {}})")), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"problem": {"nx": "big"}})")), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"problem": {"kind": "wave"}})")), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"([1, 2])")), ConfigError);
}

TEST(Config, FlagsOverrideFile) {
  auto cfg = parse_config(nlohmann::json::parse(R"({"problem": {"nx": 10, "nu": 0.3}, "trials": {"seeds": [4, 5]}})"));
  Overrides o;
  o.nx = 12;
  o.no_boundary = true;
  o.seed = 7;
  o.trials = 3;
  apply_overrides(cfg, o);
  EXPECT_EQ(cfg.problem.nx, 12u);
  EXPECT_DOUBLE_EQ(cfg.problem.nu, 0.3);
  EXPECT_FALSE(cfg.solver.boundary_enabled);
  EXPECT_EQ(cfg.trials.resolved(), (std::vector<std::uint64_t>{7, 8, 9}));

  Overrides list;
  list.seeds = std::vector<std::uint64_t>{1, 1};
  apply_overrides(cfg, list);
  EXPECT_EQ(cfg.trials.resolved(), (std::vector<std::uint64_t>{1, 1}));

  Overrides clash;
  clash.seeds = std::vector<std::uint64_t>{1, 2};
  clash.trials = 5;
  EXPECT_THROW(apply_overrides(cfg, clash), ConfigError);
}

TEST(Config, Validation) {
  ExperimentConfig cfg;
  EXPECT_NO_THROW(validate(cfg, Command::Solve));
  cfg.problem.nu = 0.0;
  EXPECT_THROW(validate(cfg, Command::Solve), ConfigError);
  cfg = ExperimentConfig{};
  cfg.problem.nx = 2;
  EXPECT_THROW(validate(cfg, Command::Solve), ConfigError);
  cfg = ExperimentConfig{};
  cfg.problem.ny = 40;  // Poisson needs hx == hy
  EXPECT_THROW(validate(cfg, Command::Solve), ConfigError);
  cfg.problem.kind = ProblemKind::Heat;
  EXPECT_NO_THROW(validate(cfg, Command::Solve));
  cfg = ExperimentConfig{};
  cfg.trials.seeds = {3};
  EXPECT_THROW(validate(cfg, Command::Trials), ConfigError);
  EXPECT_NO_THROW(validate(cfg, Command::Solve));
  cfg = ExperimentConfig{};
  cfg.problem.kind = ProblemKind::Heat;
  EXPECT_THROW(validate(cfg, Command::Sweep), ConfigError);
  cfg.problem.kind.reset();
  EXPECT_NO_THROW(validate(cfg, Command::Sweep));
  cfg.sweep_nu = {0.1, -0.1};
  EXPECT_THROW(validate(cfg, Command::Sweep), ConfigError);
  cfg = ExperimentConfig{};
  cfg.solver.eps_decay = 1.0;
  EXPECT_THROW(validate(cfg, Command::Solve), ConfigError);
}

TEST(Config, OutDirPrecedence) {
  ExperimentConfig cfg;
  cfg.out_dir = "explicit";
  ::setenv("EFP_OUT_DIR", "from_env", 1);
  resolve_out_dir(cfg);
  EXPECT_EQ(cfg.out_dir, "explicit");
  cfg.out_dir.clear();
  resolve_out_dir(cfg);
  EXPECT_EQ(cfg.out_dir, "from_env");
  ::unsetenv("EFP_OUT_DIR");
  cfg.out_dir.clear();
  resolve_out_dir(cfg);
  EXPECT_EQ(cfg.out_dir, "efp_out");
}

// ----- Commands through the library -------------------------------------------

TEST(Commands, InvalidConfigWritesNothing) {
  TempDir tmp;
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::Burgers;
  cfg.problem.nu = -1.0;
  cfg.out_dir = (tmp.path() / "out").string();
  std::ostringstream out, err;
  EXPECT_EQ(run_command(Command::Solve, cfg, out, err), 2);
  EXPECT_FALSE(fs::exists(tmp.path() / "out"));
  EXPECT_NE(err.str().find("nu"), std::string::npos);
  EXPECT_TRUE(out.str().empty());
}

TEST(Commands, TrialsCsvRows) {
  TempDir tmp;
  ExperimentConfig cfg;
  cfg.problem.kind = ProblemKind::Heat;
  cfg.problem.nx = cfg.problem.ny = 10;
  cfg.solver.max_iters = 5;
  cfg.solver.cg_max_iters = 2;
  cfg.trials.seeds = {1, 2};
  cfg.out_dir = tmp.path().string();
  std::ostringstream out, err;
  EXPECT_EQ(run_command(Command::Trials, cfg, out, err), 0) << err.str();
  std::ifstream in(tmp.path() / "trials.csv");
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "seed,status,rel_l2_error,wall_time_s,iterations,message");
  std::getline(in, row);
  EXPECT_EQ(row.rfind("1,ok,", 0), 0u);
}

// ----- CLI ----------------------------------------------------------------------

TEST(Cli, SolveWritesSelfDescribingOutputs) {
  TempDir tmp;
  const fs::path out = tmp.path() / "solve";
  auto r = run_cli("solve --problem poisson --nx 16 --ny 16 --seed 3 --out \"" + out.string() + "\"", tmp.path());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("poisson 16x16 seed 3: rel_l2_error"), std::string::npos);
  for (const char* f : {"final_u.csv", "exact_u.csv", "abs_error.csv", "history.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(first_line(out / "history.csv"), "iter,energy,residual_norm,rel_l2_error,eps");
  EXPECT_LE(line_count(out / "history.csv"), 201u);
  EXPECT_EQ(first_line(out / "final_u.csv").substr(0, 6), "x0,x1,");
  EXPECT_EQ(line_count(out / "final_u.csv"), 17u);

  const auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m.at("schema_version"), 1);
  EXPECT_EQ(m.at("version"), EFP_VERSION);
  EXPECT_EQ(m.at("command"), "solve");
  EXPECT_EQ(m.at("status"), "ok");
  EXPECT_EQ(m.at("config").at("problem").at("nx"), 16);
  EXPECT_EQ(m.at("config").at("trials").at("seeds")[0], 3);
  EXPECT_EQ(m.at("files").size(), 5u);

  const auto grid = make_grid(GridKind::Spatial2D, 16, 16);
  std::ifstream fin(out / "final_u.csv"), ein(out / "exact_u.csv"), ain(out / "abs_error.csv");
  const Field fu = read_csv(fin, grid), ex = read_csv(ein, grid), ae = read_csv(ain, grid);
  for (std::size_t k = 0; k < fu.size(); ++k) EXPECT_EQ(ae[k], std::abs(fu[k] - ex[k]));
  EXPECT_NEAR(m.at("results").at("rel_l2_error_pct").get<double>(), relative_l2_error(fu, ex), 1e-12);
}

TEST(Cli, InvalidNuExitsNonzeroWithoutFiles) {
  TempDir tmp;
  const fs::path out = tmp.path() / "bad";
  auto r = run_cli("solve --problem burgers --nu -0.5 --out \"" + out.string() + "\"", tmp.path());
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(r.err.find("nu must be > 0"), std::string::npos);
}

TEST(Cli, SingleSeedTrialsIsAnError) {
  TempDir tmp;
  const fs::path out = tmp.path() / "t";
  auto r = run_cli("trials --seeds 5 --out \"" + out.string() + "\"", tmp.path());
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(fs::exists(out));
  r = run_cli("trials --trials 1 --out \"" + out.string() + "\"", tmp.path());
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, UnknownFlagAndBadConfigRejected) {
  TempDir tmp;
  EXPECT_NE(run_cli("solve --bogus 1", tmp.path()).status, 0);
  EXPECT_NE(run_cli("", tmp.path()).status, 0);
  const fs::path cfg = tmp.path() / "c.json";
  std::ofstream(cfg) << R"({"solver": {"dtau": -1}})";
  const fs::path out = tmp.path() / "o";
  auto r = run_cli("solve --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"", tmp.path());
  EXPECT_NE(r.status, 0);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, ConfigFileWithFlagOverrideAndEnvOutDir) {
  TempDir tmp;
  const fs::path cfg = tmp.path() / "c.json";
  std::ofstream(cfg) << R"({"problem": {"kind": "heat", "nx": 10, "ny": 10}, "solver": {"max_iters": 5}})";
  const fs::path env_out = tmp.path() / "env_out";
  auto r = run_cli("solve --config \"" + cfg.string() + "\" --nx 12", tmp.path(),
                   "EFP_OUT_DIR=\"" + env_out.string() + "\"");
  ASSERT_EQ(r.status, 0) << r.err;
  const auto m = read_json(env_out / "manifest.json");
  EXPECT_EQ(m.at("config").at("problem").at("kind"), "heat");
  EXPECT_EQ(m.at("config").at("problem").at("nx"), 12);
  EXPECT_EQ(m.at("config").at("solver").at("max_iters"), 5);
  EXPECT_EQ(line_count(env_out / "history.csv"), 6u);
}

TEST(Cli, TrialsSummaryAndDeterminism) {
  TempDir tmp;
  const fs::path out = tmp.path() / "trials";
  auto r = run_cli("trials --problem heat --nx 12 --ny 12 --seeds 4,9,4 --workers 2 --out \"" + out.string() + "\"",
                   tmp.path());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(first_line(out / "summary.csv"),
            "trial_count,failed_count,mean_error_pct,std_error_pct,mean_time_s,std_time_s,degenerate,"
            "max_pairwise_rel_distance");
  EXPECT_EQ(line_count(out / "trials.csv"), 4u);
  EXPECT_TRUE(fs::exists(out / "history_0_seed4.csv"));
  EXPECT_TRUE(fs::exists(out / "history_1_seed9.csv"));
  EXPECT_TRUE(fs::exists(out / "history_2_seed4.csv"));
  std::ifstream a(out / "history_0_seed4.csv"), b(out / "history_2_seed4.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  const auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m.at("results").at("failed_count"), 0);
  EXPECT_LT(m.at("results").at("max_pairwise_rel_distance").get<double>(), 1e-3);
}

TEST(Cli, SweepSummaryColumns) {
  TempDir tmp;
  const fs::path out = tmp.path() / "sweep";
  auto r = run_cli("sweep --nx 12 --ny 12 --trials 2 --nu-list 0.1,0.2 --max-iters 20 --out \"" + out.string() + "\"",
                   tmp.path());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(first_line(out / "summary.csv"), "nu,mean_error_pct,std_error_pct,mean_time_s");
  EXPECT_EQ(line_count(out / "summary.csv"), 3u);
  EXPECT_EQ(line_count(out / "trials.csv"), 5u);
  const auto m = read_json(out / "manifest.json");
  EXPECT_EQ(m.at("command"), "sweep");
  EXPECT_EQ(m.at("results").size(), 2u);
}

TEST(Cli, SweepRejectsOtherProblems) {
  TempDir tmp;
  EXPECT_NE(run_cli("sweep --problem heat --out \"" + (tmp.path() / "x").string() + "\"", tmp.path()).status, 0);
  EXPECT_FALSE(fs::exists(tmp.path() / "x"));
}

TEST(Cli, AblationWritesFourCells) {
  TempDir tmp;
  const fs::path out = tmp.path() / "abl";
  auto r = run_cli("ablation --nx 12 --ny 12 --max-iters 40 --out \"" + out.string() + "\"", tmp.path());
  ASSERT_EQ(r.status, 0) << r.err;
  for (const char* cell : {"smooth_on_boundary_on", "smooth_off_boundary_on", "smooth_on_boundary_off",
                           "smooth_off_boundary_off"}) {
    EXPECT_EQ(first_line(out / (std::string("history_") + cell + ".csv")), kHistoryHeader);
  }
  EXPECT_EQ(line_count(out / "summary.csv"), 5u);
  EXPECT_EQ(first_line(out / "summary.csv").substr(0, 23), "cell,smoothing,boundary");
}

TEST(Cli, VersionAndHelp) {
  TempDir tmp;
  auto r = run_cli("--version", tmp.path());
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find(EFP_VERSION), std::string::npos);
  r = run_cli("solve --help", tmp.path());
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("--no-boundary"), std::string::npos);
}
