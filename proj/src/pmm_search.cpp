#include "mtp/pmm_search.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "mtp/errors.hpp"

namespace mtp {

std::optional<Collision> firstCollision(const PmmTrajectory& traj, const EsdfGrid& esdf,
                                        double d_c, double dt_cc) {
  if (!(dt_cc > 0.0)) throw std::invalid_argument("collision sampling step must be positive");
  double t0 = 0.0;
  for (std::size_t i = 0; i < traj.primitives.size(); ++i) {
    const auto& prim = traj.primitives[i];
    // samples on the global dt_cc grid that fall inside this primitive
    const long k_begin = static_cast<long>(std::ceil(t0 / dt_cc - 1e-9));
    for (long k = k_begin;; ++k) {
      const double t = k * dt_cc;
      if (t > t0 + prim.T) break;
      const double local = std::clamp(t - t0, 0.0, prim.T);
      if (!esdf.isPositionFree(samplePrimitive(prim, local).p, d_c)) return Collision{t, i};
    }
    t0 += prim.T;
    if (i + 1 == traj.primitives.size() && !esdf.isPositionFree(samplePrimitive(prim, prim.T).p, d_c))
      return Collision{t0, i};
  }
  return std::nullopt;
}

namespace {

struct Candidate {
  std::vector<Vec3> positions;
  std::vector<int> segment;   // original segment each position opens
  std::vector<bool> is_goal;  // original goal or inserted position
  PmmTrajectory trajectory;
  long order = 0;
};

struct HeapEntry {
  double key;
  long order;
  std::size_t index;
  bool operator>(const HeapEntry& o) const {
    return key != o.key ? key > o.key : order > o.order;
  }
};

bool sameSequence(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if ((a[i] - b[i]).norm() > tol) return false;
  return true;
}

Vec3 insertionPoint(const TopoPath& path, const Vec3& before, const Vec3& after,
                    const EsdfGrid& esdf, InsertionRule rule) {
  const double sa = path.project(before);
  const double sb = path.project(after);
  const double lo = std::min(sa, sb), hi = std::max(sa, sb);
  if (rule == InsertionRule::kFarthest && path.length > 0.0) {
    double acc = 0.0, best_d = -1.0;
    Vec3 best = path.pointAt(0.5 * (lo + hi));
    for (std::size_t i = 1; i + 1 < path.waypoints.size(); ++i) {
      acc += (path.waypoints[i] - path.waypoints[i - 1]).norm();
      const double s = acc / path.length;
      if (s <= lo || s >= hi) continue;
      const double d = esdf.distanceAt(path.waypoints[i]).value_or(0.0);
      if (d > best_d) {
        best_d = d;
        best = path.waypoints[i];
      }
    }
    return best;
  }
  return path.pointAt(0.5 * (lo + hi));
}

}  // namespace

PointMassPlan planPointMass(const std::vector<std::vector<TopoPath>>& topo,
                            const GoalSequence& goals, const EsdfGrid& esdf,
                            const PointMassSearchParams& params) {
  if (goals.size() < 2) throw std::invalid_argument("need at least two goals");
  if (topo.size() + 1 != goals.size())
    throw std::invalid_argument("one topological path list per goal segment");
  for (const auto& seg : topo)
    if (seg.empty()) throw std::invalid_argument("every segment needs a topological path");

  PointMassPlan plan;
  std::vector<Candidate> store;
  std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap;
  long order = 0;

  auto push = [&](Candidate c) -> bool {
    try {
      c.trajectory = velocitySearch(c.positions, params.velocity).trajectory;
    } catch (const PlanningError&) {
      return false;
    }
    ++plan.velocity_searches;
    c.order = order++;
    heap.push(HeapEntry{c.trajectory.T, c.order, store.size()});
    store.push_back(std::move(c));
    return true;
  };

  Candidate initial;
  initial.positions = goals.positions;
  for (std::size_t j = 0; j < goals.size(); ++j) {
    initial.segment.push_back(static_cast<int>(j));
    initial.is_goal.push_back(true);
  }
  if (!push(initial))
    throw PointMassSearchError("velocity search failed on the original goal sequence", {});

  std::vector<std::vector<Vec3>> seen{initial.positions};
  while (!heap.empty()) {
    if (plan.expansions >= params.max_expansions) break;
    const HeapEntry top = heap.top();
    heap.pop();
    ++plan.expansions;
    const Candidate& best = store[top.index];

    PointMassSearchLogEntry entry;
    entry.expansion = plan.expansions;
    entry.key = top.key;
    const auto hit = firstCollision(best.trajectory, esdf, params.d_c, params.dt_cc);
    if (!hit) {
      plan.log.push_back(entry);
      plan.trajectory = best.trajectory;
      for (std::size_t i = 0; i < best.positions.size(); ++i)
        if (best.is_goal[i]) plan.goal_index.push_back(i);
      return plan;
    }
    entry.collision_time = hit->time;

    const std::size_t k = hit->primitive;
    const int seg = best.segment[k];
    const int inserted_here = static_cast<int>(std::count_if(
      best.positions.begin(), best.positions.end(), [&, i = std::size_t{0}](const Vec3&) mutable {
        const bool r = !best.is_goal[i] && best.segment[i] == seg;
        ++i;
        return r;
      }));
    if (inserted_here < params.max_insertions_per_segment) {
      // copy: pushing may reallocate the store
      const Candidate parent = best;
      for (const auto& path : topo[seg]) {
        const Vec3 p = insertionPoint(path, parent.positions[k], parent.positions[k + 1], esdf,
                                      params.insertion);
        if (!esdf.isPositionFree(p, params.d_c)) continue;
        if ((p - parent.positions[k]).norm() <= params.duplicate_tol ||
            (p - parent.positions[k + 1]).norm() <= params.duplicate_tol)
          continue;
        Candidate child = parent;
        child.positions.insert(child.positions.begin() + k + 1, p);
        child.segment.insert(child.segment.begin() + k + 1, seg);
        child.is_goal.insert(child.is_goal.begin() + k + 1, false);
        if (std::any_of(seen.begin(), seen.end(), [&](const auto& s) {
              return sameSequence(s, child.positions, params.duplicate_tol);
            }))
          continue;
        seen.push_back(child.positions);
        if (push(std::move(child))) entry.inserted.push_back(p);
      }
    }
    plan.log.push_back(entry);
  }
  throw PointMassSearchError("no collision-free point-mass trajectory", std::move(plan.log));
}

}  // namespace mtp
