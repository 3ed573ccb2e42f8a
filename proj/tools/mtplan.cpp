#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "mtp/config.hpp"
#include "mtp/map_io.hpp"
#include "mtp/pipeline.hpp"
#include "mtp/trajectory_io.hpp"

namespace {

using namespace mtp;

constexpr int kExitViolations = 1;
constexpr int kExitConfig = static_cast<int>(PipelineStatus::kConfigError);

/// Options shared by every subcommand; explicit flags override `--set`,
/// which overrides the configuration file.
struct CommonOptions {
  std::string config_path;
  std::string map_path;
  std::string waypoints_path;
  std::string out_dir;
  std::string log_level;
  long seed = 0;
  std::vector<std::string> overrides;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd, bool planning) {
    cmd->add_option("--config", config_path, "key = value configuration file");
    cmd->add_option("--map", map_path, "occupancy map (voxmap)");
    cmd->add_option("--log-level", log_level, "trace, debug, info, warn, error or off");
    cmd->add_option("--set", overrides, "override one key, e.g. --set sst.max_iters=2e5");
    if (!planning) return;
    cmd->add_option("--waypoints", waypoints_path, "goal file: x y z [dx dy dz max_angle]");
    cmd->add_option("--out-dir", out_dir, "directory for the artifacts");
    seed_opt = cmd->add_option("--seed", seed, "random seed");
  }

  PlannerConfig resolve() const {
    PlannerConfig c = config_path.empty() ? PlannerConfig{} : loadConfig(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      setConfigValue(c, o.substr(0, eq), o.substr(eq + 1));
    }
    if (!map_path.empty()) c.map_path = map_path;
    if (!waypoints_path.empty()) c.waypoints_path = waypoints_path;
    if (!out_dir.empty()) c.out_dir = out_dir;
    if (!log_level.empty()) c.log_level = log_level;
    if (seed_opt && seed_opt->count() > 0) c.seed = seed;
    c.validate();
    return c;
  }
};

void setupLogging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("mtplan");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off")
    throw ConfigError("unknown log level '" + level + "'");
  spdlog::set_level(lvl);
}

int runPlan(const CommonOptions& opts) {
  const PlannerConfig cfg = opts.resolve();
  setupLogging(cfg.log_level);
  const PipelineResult r = runPipeline(cfg);
  writeSummary(std::cout, r);
  return r.exitCode();
}

int runBenchCommand(const CommonOptions& opts, int runs) {
  const PlannerConfig cfg = opts.resolve();
  setupLogging(cfg.log_level);
  const BenchReport rep = runBench(cfg, runs);
  std::filesystem::create_directories(cfg.out_dir);
  const auto dir = std::filesystem::path(cfg.out_dir);
  std::ofstream runs_csv(dir / "bench_runs.csv"), stats_csv(dir / "bench_stats.csv");
  writeBenchRuns(runs_csv, rep);
  writeBenchStats(stats_csv, rep);
  writeBenchStats(std::cout, rep);
  return rep.succeeded > 0 ? 0 : 1;
}

int runEsdf(const CommonOptions& opts, const std::string& out_path) {
  const PlannerConfig cfg = opts.resolve();
  setupLogging(cfg.log_level);
  if (cfg.map_path.empty()) throw ConfigError("--map is required");
  const EsdfGrid esdf = buildEsdf(loadVoxmap(cfg.map_path), cfg.d_sat);
  saveEsdfCache(out_path, esdf);
  spdlog::info("wrote {}", out_path);
  return 0;
}

int runVerify(const CommonOptions& opts, const std::string& traj_path,
              const std::string& esdf_path) {
  const PlannerConfig cfg = opts.resolve();
  setupLogging(cfg.log_level);
  if (cfg.waypoints_path.empty()) throw ConfigError("--waypoints is required");
  const std::optional<EsdfGrid> esdf =
    !esdf_path.empty()      ? loadEsdfCache(esdf_path)
    : !cfg.esdf_cache.empty() ? loadEsdfCache(cfg.esdf_cache)
    : !cfg.map_path.empty() ? std::optional(buildEsdf(loadVoxmap(cfg.map_path), cfg.d_sat))
                            : std::nullopt;
  if (!esdf) throw ConfigError("--map or --esdf is required");
  const GoalSequence goals = loadGoals(cfg.waypoints_path, cfg.r_tol);
  const auto rows = loadTrajectoryCsv(traj_path);
  VerifyParams vp;
  vp.d_c = cfg.d_c;
  vp.r_tol = cfg.r_tol;
  vp.dt_int = cfg.sst.dt_int;
  const VerifyReport rep = verifyTrajectory(rows, *esdf, goals, cfg.quad, vp);
  std::printf("rows: %zu\nmin_clearance: %.4f\nmax_dynamics_error: %.3g\ngoals_reached: %zu of %zu\n",
              rep.rows, rep.min_clearance, rep.max_dynamics_error, rep.goals_reached, goals.size());
  for (const auto& v : rep.violations) std::printf("violation: %s\n", v.c_str());
  if (rep.violation_count > rep.violations.size())
    std::printf("... %zu more violations\n", rep.violation_count - rep.violations.size());
  std::printf("%s\n", rep.ok ? "OK" : "FAILED");
  return rep.ok ? 0 : kExitViolations;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-goal minimum-time quadrotor planner"};
  app.require_subcommand(1);

  CommonOptions plan_opts, bench_opts, esdf_opts, verify_opts, config_opts;
  auto* plan = app.add_subcommand("plan", "run the three planning stages");
  plan_opts.attach(plan, true);

  int runs = 30;
  auto* bench = app.add_subcommand("bench", "repeat the pipeline over consecutive seeds");
  bench_opts.attach(bench, true);
  bench->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber);

  std::string esdf_out;
  auto* esdf = app.add_subcommand("esdf", "precompute the distance field of a map");
  esdf_opts.attach(esdf, false);
  esdf->add_option("--out", esdf_out, "ESDF cache file")->required();

  std::string traj_path, esdf_path;
  auto* verify = app.add_subcommand("verify", "check a trajectory CSV against map and limits");
  verify_opts.attach(verify, true);
  verify->add_option("--trajectory", traj_path, "trajectory CSV")->required();
  verify->add_option("--esdf", esdf_path, "ESDF cache instead of --map");

  auto* config = app.add_subcommand("config", "print the effective configuration");
  config_opts.attach(config, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*plan) return runPlan(plan_opts);
    if (*bench) return runBenchCommand(bench_opts, runs);
    if (*esdf) return runEsdf(esdf_opts, esdf_out);
    if (*verify) return runVerify(verify_opts, traj_path, esdf_path);
    if (*config) {
      writeConfig(std::cout, config_opts.resolve());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const MapFormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const TrajectoryFormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(PipelineStatus::kFailure);
  }
  return 0;
}
