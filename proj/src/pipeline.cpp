#include "mtp/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>

#include "mtp/errors.hpp"
#include "mtp/map_io.hpp"
#include "mtp/trajectory_io.hpp"

namespace mtp {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Json toJson(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

/// Non-finite values become null.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

class ArtifactWriter {
 public:
  ArtifactWriter(fs::path dir, PipelineResult& result) : dir_(std::move(dir)), result_(result) {}

  /// Writes `name` (plus `.partial` when set) through `fill`.
  template <class Fill>
  void write(const std::string& name, bool partial, Fill&& fill) {
    const fs::path path = dir_ / (partial ? name + ".partial" : name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    fill(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
    result_.artifacts.push_back(path.string());
  }

 private:
  fs::path dir_;
  PipelineResult& result_;
};

void writePaths(std::ostream& out, const std::vector<std::vector<TopoPath>>& topo) {
  for (std::size_t s = 0; s < topo.size(); ++s)
    for (std::size_t k = 0; k < topo[s].size(); ++k) {
      Json j;
      j["segment_index"] = s;
      j["path_index"] = k;
      Json pts = Json::array();
      for (const auto& w : topo[s][k].waypoints) pts.push_back(toJson(w));
      j["waypoints"] = std::move(pts);
      j["length"] = topo[s][k].length;
      out << j.dump() << '\n';
    }
}

void writePrimitives(std::ostream& out, const PmmTrajectory& traj) {
  double t = 0.0;
  for (std::size_t i = 0; i < traj.primitives.size(); ++i) {
    const PmmPrimitive& prim = traj.primitives[i];
    Json j;
    j["index"] = i;
    j["t_start"] = t;
    j["start"] = {{"p", toJson(prim.start.p)}, {"v", toJson(prim.start.v)}};
    j["end"] = {{"p", toJson(prim.end.p)}, {"v", toJson(prim.end.v)}};
    j["a_t"] = toJson(prim.a_t);
    Json axes = Json::array();
    for (const auto& ax : prim.axes)
      axes.push_back({{"a1", ax.a1}, {"a2", ax.a2}, {"t1", ax.t1}, {"T", ax.T}});
    j["axes"] = std::move(axes);
    j["T"] = prim.T;
    out << j.dump() << '\n';
    t += prim.T;
  }
}

void writeSearchLog(std::ostream& out, const std::vector<PointMassSearchLogEntry>& log) {
  for (const auto& e : log) {
    Json j;
    j["expansion"] = e.expansion;
    j["key"] = e.key;
    j["collision_time"] = e.collision_time ? Json(*e.collision_time) : Json(nullptr);
    Json ins = Json::array();
    for (const auto& p : e.inserted) ins.push_back(toJson(p));
    j["inserted"] = std::move(ins);
    out << j.dump() << '\n';
  }
}

void writeSstLog(std::ostream& out, const std::vector<SstLogEntry>& log) {
  for (const auto& e : log) {
    Json j;
    j["iteration"] = e.iteration;
    j["goal"] = e.goal;
    j["accepted"] = e.accepted;
    j["tree_size"] = e.tree_size;
    j["witnesses"] = e.witnesses;
    j["best_T"] = number(e.best_T);
    out << j.dump() << '\n';
  }
}

/// Every live edge of the tree as a polyline, one position per `stride`
/// integration sub-steps plus the edge end.
void writeTree(std::ostream& out, const GuidedSst& sst, const QuadParams& quad, double dt,
               int stride = 5) {
  const auto& nodes = sst.nodes();
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const TreeNode& n = nodes[id];
    if (n.removed || n.parent < 0) continue;
    QuadState x = nodes[n.parent].x;
    Json pts = Json::array({toJson(x.p)});
    const auto cmds = sst.edgeCommands(n.edge);
    for (std::size_t k = 0; k < cmds.size(); ++k) {
      x = rk4Step(x, cmds[k], dt, quad);
      if ((k + 1) % stride == 0 && k + 1 < cmds.size()) pts.push_back(toJson(x.p));
    }
    pts.push_back(toJson(n.x.p));
    Json j;
    j["node"] = id;
    j["parent"] = n.parent;
    j["goal"] = n.goal;
    j["active"] = n.active;
    j["cost"] = n.cost;
    j["points"] = std::move(pts);
    out << j.dump() << '\n';
  }
}

PipelineResult& finish(PipelineResult& res, PipelineStatus status, std::string message,
                       Clock::time_point t0) {
  res.status = status;
  res.message = std::move(message);
  res.wall.total = secondsSince(t0);
  if (status == PipelineStatus::kOk)
    spdlog::info("done in {:.3f} s", res.wall.total);
  else
    spdlog::error("{}: {}", statusName(status), res.message);
  return res;
}

}  // namespace

const char* statusName(PipelineStatus status) {
  switch (status) {
    case PipelineStatus::kOk: return "ok";
    case PipelineStatus::kFailure: return "failure";
    case PipelineStatus::kConfigError: return "config error";
    case PipelineStatus::kUnreachableGoal: return "unreachable goal";
    case PipelineStatus::kPointMassFailure: return "point-mass stage failed";
    case PipelineStatus::kStall: return "sampling stage stalled";
  }
  return "unknown";
}

PipelineResult runPipeline(const PlannerConfig& config) {
  const auto t0 = Clock::now();
  PipelineResult res;
  PlannerConfig cfg = config;
  cfg.propagateShared();
  spdlog::set_level(spdlog::level::from_str(cfg.log_level));

  // Inputs. Every failure here is a configuration error and leaves no files.
  std::optional<EsdfGrid> esdf;
  GoalSequence goals;
  try {
    cfg.validate();
    if (cfg.waypoints_path.empty()) throw ConfigError("no waypoint file given");
    if (cfg.map_path.empty() && cfg.esdf_cache.empty()) throw ConfigError("no map file given");
    goals = loadGoals(cfg.waypoints_path, cfg.r_tol);
    if (goals.size() < 2) throw ConfigError("the waypoint file needs at least two goals");
    if (!cfg.esdf_cache.empty()) {
      esdf = loadEsdfCache(cfg.esdf_cache);
    } else {
      esdf = buildEsdf(loadVoxmap(cfg.map_path), cfg.d_sat);
    }
  } catch (const std::exception& e) {
    return finish(res, PipelineStatus::kConfigError, e.what(), t0);
  }
  res.goals = goals.size();
  res.wall.load = secondsSince(t0);
  spdlog::info("loaded {} goals and a {}x{}x{} map in {:.3f} s", goals.size(),
               esdf->geometry().dims[0], esdf->geometry().dims[1], esdf->geometry().dims[2],
               res.wall.load);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) return finish(res, PipelineStatus::kFailure, "cannot create " + cfg.out_dir, t0);
  ArtifactWriter artifacts(cfg.out_dir, res);
  const auto seed = static_cast<std::uint64_t>(cfg.seed);

  try {
    // Stage 1: topological paths between consecutive goals.
    auto t = Clock::now();
    std::vector<std::vector<TopoPath>> topo;
    try {
      topo = topologicalPaths(goals, *esdf, cfg.topo, seed);
    } catch (const PlanningError& e) {
      res.wall.topo = secondsSince(t);
      return finish(res, PipelineStatus::kUnreachableGoal, e.what(), t0);
    }
    res.wall.topo = secondsSince(t);
    std::size_t n_paths = 0;
    for (const auto& s : topo) n_paths += s.size();
    spdlog::info("stage 1: {} paths over {} segments in {:.3f} s", n_paths, topo.size(),
                 res.wall.topo);
    if (cfg.dump_paths)
      artifacts.write("stage1_paths.jsonl", false, [&](std::ostream& o) { writePaths(o, topo); });

    // Stage 2: collision-free point-mass trajectory.
    t = Clock::now();
    PointMassPlan plan;
    try {
      plan = planPointMass(topo, goals, *esdf, cfg.pmm);
    } catch (const PlanningError& e) {
      res.wall.pmm = secondsSince(t);
      if (cfg.dump_pmm)
        if (const auto* se = dynamic_cast<const PointMassSearchError*>(&e))
          artifacts.write("stage2_search.jsonl", true,
                          [&](std::ostream& o) { writeSearchLog(o, se->log()); });
      return finish(res, PipelineStatus::kPointMassFailure, e.what(), t0);
    }
    res.wall.pmm = secondsSince(t);
    res.T_pmm = plan.trajectory.T;
    spdlog::info("stage 2: T_pmm {:.4f} s, {} positions, {} expansions in {:.3f} s",
                 plan.trajectory.T, plan.trajectory.positions.size(), plan.expansions,
                 res.wall.pmm);
    if (cfg.dump_pmm) {
      artifacts.write("stage2_pmm.jsonl", false,
                      [&](std::ostream& o) { writePrimitives(o, plan.trajectory); });
      artifacts.write("stage2_search.jsonl", false,
                      [&](std::ostream& o) { writeSearchLog(o, plan.log); });
    }
    if (!cfg.run_sst) {
      res.T_final = res.T_pmm;
      return finish(res, PipelineStatus::kOk, "sampling stage disabled", t0);
    }

    // Stage 3: full-model sampling search around the guide.
    t = Clock::now();
    const GuideReference guide(plan.trajectory, cfg.quad, cfg.guide);
    GuidedSst sst(guide, goals, goalGuideTimes(guide, plan.trajectory, plan.goal_index), *esdf,
                  cfg.sst, seed);
    const SstResult out = sst.run();
    res.wall.sst = secondsSince(t);
    res.best_goal = out.stats.best_goal;
    res.sst_iterations = out.stats.iterations;
    spdlog::info("stage 3: {} iterations, {} goals reached, {} nodes in {:.3f} s",
                 out.stats.iterations, out.stats.best_goal, sst.liveNodes(), res.wall.sst);

    const bool solved = out.stats.solved;
    const QuadTrajectory& traj = solved ? out.trajectory : out.partial;
    const auto rows = resampleTrajectory(traj, cfg.dt_out, cfg.quad);
    artifacts.write("trajectory.csv", !solved,
                    [&](std::ostream& o) { writeTrajectoryCsv(o, rows); });
    if (cfg.sst.log_stride > 0)
      artifacts.write("sst_log.jsonl", !solved, [&](std::ostream& o) { writeSstLog(o, out.log); });
    if (cfg.dump_tree)
      artifacts.write("sst_tree.jsonl", !solved,
                      [&](std::ostream& o) { writeTree(o, sst, cfg.quad, cfg.sst.dt_int); });
    if (!solved) {
      char msg[160];
      std::snprintf(msg, sizeof(msg), "stopped after %ld iterations with goal index %d of %zu",
                    out.stats.iterations, out.stats.best_goal, goals.size() - 1);
      return finish(res, PipelineStatus::kStall, msg, t0);
    }
    res.T_final = out.trajectory.T;
    return finish(res, PipelineStatus::kOk, "", t0);
  } catch (const std::exception& e) {
    return finish(res, PipelineStatus::kFailure, e.what(), t0);
  }
}

void writeSummary(std::ostream& out, const PipelineResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "status: %s (exit %d)\n", statusName(r.status), r.exitCode());
  out << buf;
  if (!r.message.empty()) out << "message: " << r.message << '\n';
  std::snprintf(buf, sizeof(buf),
                "wall_s: load %.3f topo %.3f pmm %.3f sst %.3f total %.3f\n", r.wall.load,
                r.wall.topo, r.wall.pmm, r.wall.sst, r.wall.total);
  out << buf;
  std::snprintf(buf, sizeof(buf), "T_pmm: %.6f\nT_final: %.6f\n", r.T_pmm, r.T_final);
  out << buf;
  if (r.goals > 0) {
    std::snprintf(buf, sizeof(buf), "best_goal_index: %d of %zu\n", r.best_goal, r.goals - 1);
    out << buf;
  }
  if (r.sst_iterations > 0) out << "sst_iterations: " << r.sst_iterations << '\n';
  for (const auto& a : r.artifacts) out << "artifact: " << a << '\n';
}

BenchStat summarize(const std::vector<double>& values) {
  BenchStat s;
  if (values.empty()) return s;
  double sum = 0.0, best = values.front();
  for (double v : values) {
    sum += v;
    best = std::min(best, v);
  }
  s.mean = sum / values.size();
  double sq = 0.0;
  for (double v : values) sq += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(sq / values.size());
  s.best = best;
  return s;
}

BenchReport runBench(const PlannerConfig& config, int n_runs) {
  if (n_runs < 1) throw std::invalid_argument("bench needs at least one run");
  BenchReport rep;
  std::vector<double> times, walls;
  for (int i = 0; i < n_runs; ++i) {
    PlannerConfig c = config;
    c.seed = config.seed + i;
    c.out_dir = (fs::path(config.out_dir) / ("run_" + std::to_string(c.seed))).string();
    spdlog::info("bench run {} of {} (seed {})", i + 1, n_runs, c.seed);
    BenchRun run{c.seed, runPipeline(c)};
    if (run.result.status == PipelineStatus::kOk) {
      ++rep.succeeded;
      times.push_back(run.result.T_final);
      walls.push_back(run.result.wall.total);
    } else {
      ++rep.failed;
    }
    rep.runs.push_back(std::move(run));
  }
  rep.T_final = summarize(times);
  rep.wall = summarize(walls);
  return rep;
}

void writeBenchRuns(std::ostream& out, const BenchReport& report) {
  out << "seed,status,T_pmm,T_final,best_goal,iterations,wall_s\n";
  char buf[256];
  for (const auto& run : report.runs) {
    const auto& r = run.result;
    std::snprintf(buf, sizeof(buf), "%ld,%d,%.9g,%.9g,%d,%ld,%.3f\n", run.seed, r.exitCode(),
                  r.T_pmm, r.T_final, r.best_goal, r.sst_iterations, r.wall.total);
    out << buf;
  }
}

void writeBenchStats(std::ostream& out, const BenchReport& report) {
  out << "metric,mean,std,best,succeeded,failed\n";
  char buf[256];
  auto row = [&](const char* name, const BenchStat& s) {
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%zu,%zu\n", name, s.mean, s.stddev,
                  s.best, report.succeeded, report.failed);
    out << buf;
  };
  row("T_final", report.T_final);
  row("wall_s", report.wall);
}

}  // namespace mtp
