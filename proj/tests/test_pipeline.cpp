#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtp/map_io.hpp"
#include "mtp/pipeline.hpp"
#include "mtp/trajectory_io.hpp"

using namespace mtp;
namespace fs = std::filesystem;

namespace {

const std::string kData = MTP_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mtplan_test_" + name);
  fs::remove_all(dir);
  return dir;
}

PlannerConfig worldConfig(const std::string& world, const std::string& name) {
  PlannerConfig c;
  c.map_path = kData + "/" + world + ".voxmap";
  c.waypoints_path = kData + "/" + world + ".goals";
  c.out_dir = scratch(name).string();
  c.sst.max_iters = 200000;
  c.sst.stall_iters = 20000;
  c.log_level = "off";
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Shortest time to cover d - r_tol from rest with the horizontal thrust
/// left after hovering; no trajectory reaching the goal ball can be faster.
double relaxationBound(double d, double r_tol, const QuadParams& q) {
  const double a = std::sqrt(std::pow(q.maxThrustAccel(), 2) - q.gravity.squaredNorm());
  return std::sqrt(2.0 * (d - r_tol) / a);
}

}  // namespace

TEST_CASE("empty world plan") {
  const PlannerConfig cfg = worldConfig("empty", "empty");
  const PipelineResult r = runPipeline(cfg);
  INFO(r.message);
  REQUIRE(r.exitCode() == 0);
  CHECK(r.goals == 2);
  CHECK(r.best_goal == 1);
  const fs::path dir = cfg.out_dir;
  for (const char* f : {"stage1_paths.jsonl", "stage2_pmm.jsonl", "stage2_search.jsonl",
                        "trajectory.csv", "sst_log.jsonl"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK_FALSE(fs::exists(dir / "sst_tree.jsonl"));

  CHECK(r.T_final >= relaxationBound(5.0, cfg.r_tol, cfg.quad));
  CHECK(r.T_final <= cfg.sst.r_pmm * r.T_pmm + cfg.sst.t_max);

  const auto rows = loadTrajectoryCsv((dir / "trajectory.csv").string());
  CHECK(rows.back().t == doctest::Approx(r.T_final).epsilon(1e-9));
  const EsdfGrid esdf = buildEsdf(loadVoxmap(cfg.map_path), cfg.d_sat);
  const VerifyReport rep =
    verifyTrajectory(rows, esdf, loadGoals(cfg.waypoints_path, cfg.r_tol), cfg.quad);
  for (const auto& v : rep.violations) MESSAGE(v);
  CHECK(rep.ok);

  std::stringstream summary;
  writeSummary(summary, r);
  CHECK(summary.str().find("T_final") != std::string::npos);
}

TEST_CASE("precomputed distance field gives the same plan") {
  PlannerConfig a = worldConfig("empty", "cache_a");
  a.sst.max_iters = 3000;
  const fs::path cache = scratch("cache_esdf");
  fs::create_directories(cache);
  saveEsdfCache((cache / "empty.esdf").string(), buildEsdf(loadVoxmap(a.map_path), a.d_sat));
  PlannerConfig b = a;
  b.map_path.clear();
  b.esdf_cache = (cache / "empty.esdf").string();
  b.out_dir = scratch("cache_b").string();
  const PipelineResult ra = runPipeline(a), rb = runPipeline(b);
  CHECK(ra.exitCode() == rb.exitCode());
  CHECK(ra.T_pmm == rb.T_pmm);
  CHECK(slurp(fs::path(a.out_dir) / "stage2_pmm.jsonl") ==
        slurp(fs::path(b.out_dir) / "stage2_pmm.jsonl"));
}

TEST_CASE("configuration errors write nothing") {
  SUBCASE("missing map") {
    PlannerConfig c = worldConfig("empty", "missing_map");
    c.map_path = kData + "/does_not_exist.voxmap";
    const PipelineResult r = runPipeline(c);
    CHECK(r.exitCode() == 2);
    CHECK(r.artifacts.empty());
    CHECK_FALSE(fs::exists(c.out_dir));
  }
  SUBCASE("no map at all") {
    PlannerConfig c = worldConfig("empty", "no_map");
    c.map_path.clear();
    CHECK(runPipeline(c).exitCode() == 2);
  }
  SUBCASE("single goal") {
    PlannerConfig c = worldConfig("empty", "single_goal");
    const fs::path dir = scratch("single_goal_in");
    fs::create_directories(dir);
    std::ofstream(dir / "one.goals") << "1.5 2 1.5\n";
    c.waypoints_path = (dir / "one.goals").string();
    CHECK(runPipeline(c).exitCode() == 2);
    CHECK_FALSE(fs::exists(c.out_dir));
  }
}

TEST_CASE("blocked goal") {
  PlannerConfig c = worldConfig("cube", "blocked");
  const fs::path dir = scratch("blocked_in");
  fs::create_directories(dir);
  std::ofstream(dir / "blocked.goals") << "1 4 1.5\n4 4 1.5\n7 4 1.5\n";
  c.waypoints_path = (dir / "blocked.goals").string();
  const PipelineResult r = runPipeline(c);
  CHECK(r.exitCode() == 3);
  CHECK(r.message.find("goal") != std::string::npos);
}

TEST_CASE("over-constrained sampling search stalls") {
  PlannerConfig c = worldConfig("empty", "stall");
  c.sst.delta_ref = 0.05;
  c.sst.t_max = 0.01;
  c.sst.max_iters = 4000;
  c.sst.stall_iters = 1000;
  const PipelineResult r = runPipeline(c);
  INFO(r.message);
  CHECK(r.exitCode() == 5);
  CHECK(r.best_goal == 0);
  CHECK(std::isnan(r.T_final));
  CHECK(r.message.find("of 1") != std::string::npos);
  const fs::path dir = c.out_dir;
  CHECK(fs::exists(dir / "stage2_pmm.jsonl"));
  CHECK(fs::exists(dir / "trajectory.csv.partial"));
  CHECK(fs::exists(dir / "sst_log.jsonl.partial"));
  CHECK_FALSE(fs::exists(dir / "trajectory.csv"));
}

TEST_CASE("point-mass stage only") {
  // without obstacles every seed yields the same topological path, so the
  // deterministic point-mass stage gives the same duration for all runs
  PlannerConfig c = worldConfig("empty", "pmm_only");
  c.run_sst = false;
  const BenchReport rep = runBench(c, 3);
  REQUIRE(rep.succeeded == 3);
  CHECK(rep.T_final.stddev == 0.0);
  CHECK(rep.T_final.mean == rep.runs[0].result.T_pmm);
  for (const auto& run : rep.runs) {
    CHECK(run.result.T_final == run.result.T_pmm);
    CHECK_FALSE(fs::exists(fs::path(c.out_dir) / ("run_" + std::to_string(run.seed)) /
                           "trajectory.csv"));
  }
  // with obstacles the paths depend on the seed, the point-mass result on the paths
  PlannerConfig cube = worldConfig("cube", "pmm_only_cube");
  cube.run_sst = false;
  cube.seed = 4;
  const PipelineResult first = runPipeline(cube);
  cube.out_dir = scratch("pmm_only_cube_again").string();
  const PipelineResult second = runPipeline(cube);
  REQUIRE(first.exitCode() == 0);
  CHECK(first.T_pmm == second.T_pmm);

  std::stringstream runs, stats;
  writeBenchRuns(runs, rep);
  writeBenchStats(stats, rep);
  CHECK(runs.str().rfind("seed,status,T_pmm,T_final,best_goal,iterations,wall_s\n", 0) == 0);
  CHECK(stats.str().rfind("metric,mean,std,best,succeeded,failed\n", 0) == 0);
}

TEST_CASE("bench statistics") {
  const BenchStat one = summarize({2.5});
  CHECK(one.mean == 2.5);
  CHECK(one.stddev == 0.0);
  CHECK(one.best == 2.5);
  const BenchStat many = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(many.mean == 2.5);
  CHECK(many.stddev == doctest::Approx(std::sqrt(1.25)));
  CHECK(many.best == 1.0);
  CHECK(std::isnan(summarize({}).mean));

  PlannerConfig c = worldConfig("empty", "bench_one");
  const BenchReport rep = runBench(c, 1);
  REQUIRE(rep.runs.size() == 1);
  CHECK(rep.runs[0].seed == c.seed);
  if (rep.succeeded == 1) CHECK(rep.T_final.stddev == 0.0);
}

TEST_CASE("same seed, same bytes") {
  PlannerConfig a = worldConfig("empty", "det_a");
  a.seed = 7;
  PlannerConfig b = a;
  b.out_dir = scratch("det_b").string();
  const PipelineResult ra = runPipeline(a), rb = runPipeline(b);
  REQUIRE(ra.exitCode() == 0);
  REQUIRE(rb.exitCode() == 0);
  CHECK(ra.sst_iterations == rb.sst_iterations);
  for (const char* f : {"trajectory.csv", "stage1_paths.jsonl", "stage2_pmm.jsonl", "sst_log.jsonl"})
    CHECK_MESSAGE(slurp(fs::path(a.out_dir) / f) == slurp(fs::path(b.out_dir) / f), f);
}
