#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "mtp/config.hpp"

namespace mtp {

/// Process exit status of a planning run.
enum class PipelineStatus : int {
  kOk = 0,
  kFailure = 1,           // unexpected I/O or internal error
  kConfigError = 2,       // bad configuration, missing or malformed input files
  kUnreachableGoal = 3,   // a goal is blocked or no path connects two goals
  kPointMassFailure = 4,  // no collision-free point-mass trajectory
  kStall = 5,             // the sampling search stopped without reaching the last goal
};

const char* statusName(PipelineStatus status);

struct StageTimes {
  double load = 0.0;  // s, map, ESDF and goal loading
  double topo = 0.0;
  double pmm = 0.0;
  double sst = 0.0;
  double total = 0.0;
};

struct PipelineResult {
  PipelineStatus status = PipelineStatus::kOk;
  std::string message;
  StageTimes wall;
  std::size_t goals = 0;
  double T_pmm = std::numeric_limits<double>::quiet_NaN();
  /// Duration of the final trajectory (the point-mass one when the sampling
  /// stage is disabled), NaN when there is none.
  double T_final = std::numeric_limits<double>::quiet_NaN();
  int best_goal = 0;  // goals reached after the start by the sampling stage
  long sst_iterations = 0;
  std::vector<std::string> artifacts;  // files written, in order

  int exitCode() const { return static_cast<int>(status); }
};

/// Loads the map (or ESDF cache) and goals, runs the topological, point-mass
/// and sampling stages and writes their artifacts into config.out_dir:
///   stage1_paths.jsonl   one topological path per line
///   stage2_pmm.jsonl     one point-mass primitive per line
///   stage2_search.jsonl  one expansion of the point-mass search per line
///   trajectory.csv       final trajectory
///   sst_log.jsonl        sampling search log
///   sst_tree.jsonl       search tree edges (optional)
/// Artifacts of a failed stage carry a `.partial` suffix. Nothing is
/// written on a configuration error.
PipelineResult runPipeline(const PlannerConfig& config);

/// Human-readable summary: status, per-stage wall times, T_pmm, T_final.
void writeSummary(std::ostream& out, const PipelineResult& result);

struct BenchRun {
  long seed = 0;
  PipelineResult result;
};

struct BenchStat {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();  // population
  double best = std::numeric_limits<double>::quiet_NaN();    // minimum
};

struct BenchReport {
  std::vector<BenchRun> runs;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  BenchStat T_final;  // successful runs only
  BenchStat wall;     // s, total wall time of successful runs
};

/// Mean, population standard deviation and minimum; NaN when empty.
BenchStat summarize(const std::vector<double>& values);

/// Runs the pipeline n_runs times with seeds seed, seed+1, ... Each run
/// writes into out_dir/run_<seed>.
BenchReport runBench(const PlannerConfig& config, int n_runs);

/// Per-run CSV: seed,status,T_pmm,T_final,best_goal,iterations,wall_s.
void writeBenchRuns(std::ostream& out, const BenchReport& report);
/// Statistics CSV: metric,mean,std,best,succeeded,failed.
void writeBenchStats(std::ostream& out, const BenchReport& report);

}  // namespace mtp
