#pragma once

#include <optional>
#include <vector>

#include "mtp/env_map.hpp"
#include "mtp/errors.hpp"
#include "mtp/topo_prm.hpp"
#include "mtp/velocity_search.hpp"

namespace mtp {

struct Collision {
  double time = 0.0;           // s from trajectory start
  std::size_t primitive = 0;   // collision lies between positions primitive and primitive+1
};

/// Earliest sample (every dt_cc, plus the final time) whose position is not
/// free at clearance d_c.
std::optional<Collision> firstCollision(const PmmTrajectory& traj, const EsdfGrid& esdf,
                                        double d_c, double dt_cc);

enum class InsertionRule {
  kMidArc,    // point at half the arc length between the bracketing goals
  kFarthest,  // path vertex between them with the largest clearance
};

struct PointMassSearchParams {
  VelocitySearchParams velocity;
  double d_c = 0.2;
  double dt_cc = 0.01;
  int max_insertions_per_segment = 8;
  int max_expansions = 200;
  double duplicate_tol = 1e-6;
  InsertionRule insertion = InsertionRule::kMidArc;
};

struct PointMassSearchLogEntry {
  int expansion = 0;
  double key = 0.0;
  std::optional<double> collision_time;
  std::vector<Vec3> inserted;
};

/// PlanningError(kNoPointMassTrajectory) carrying the search log so far.
class PointMassSearchError : public PlanningError {
 public:
  PointMassSearchError(const std::string& what, std::vector<PointMassSearchLogEntry> log)
      : PlanningError(PlanningErrorCode::kNoPointMassTrajectory, what), log_(std::move(log)) {}
  const std::vector<PointMassSearchLogEntry>& log() const { return log_; }

 private:
  std::vector<PointMassSearchLogEntry> log_;
};

struct PointMassPlan {
  PmmTrajectory trajectory;
  /// Trajectory position index of every original goal.
  std::vector<std::size_t> goal_index;
  std::vector<PointMassSearchLogEntry> log;
  int expansions = 0;
  int velocity_searches = 0;
};

/// Best-first search over goal sequences with positions inserted from the
/// topological paths of the segment where the current best trajectory first
/// collides. Throws PointMassSearchError when the heap is exhausted or the
/// expansion cap is reached.
PointMassPlan planPointMass(const std::vector<std::vector<TopoPath>>& topo,
                            const GoalSequence& goals, const EsdfGrid& esdf,
                            const PointMassSearchParams& params);

}  // namespace mtp
