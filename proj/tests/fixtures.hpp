#pragma once

#include <cmath>

#include "mtp/env_map.hpp"
#include "mtp/topo_prm.hpp"

namespace mtp::fixture {

inline EsdfGrid openBox(double sx, double sy, double sz, double res) {
  GridGeometry g;
  g.dims = {static_cast<int>(std::lround(sx / res)), static_cast<int>(std::lround(sy / res)),
            static_cast<int>(std::lround(sz / res))};
  g.resolution = res;
  return buildEsdf(OccupancyGrid(g), 2.0);
}

/// 8 x 8 x 3 m box with a 1 m cube in the middle; goals on either side.
inline OccupancyGrid cubeOccupancy() {
  GridGeometry g;
  g.dims = {80, 80, 30};
  g.resolution = 0.1;
  OccupancyGrid occ(g);
  occ.fillBox(Vec3(3.5, 3.5, 1.0), Vec3(4.5, 4.5, 2.0));
  return occ;
}

inline EsdfGrid cubeBox() { return buildEsdf(cubeOccupancy(), 2.0); }

inline GoalSequence cubeGoals() {
  GoalSequence goals;
  goals.positions = {Vec3(1.0, 4.0, 1.5), Vec3(7.0, 4.0, 1.5)};
  return goals;
}

inline bool pathFree(const TopoPath& p, const EsdfGrid& esdf, double d_c, double step) {
  for (std::size_t i = 0; i + 1 < p.waypoints.size(); ++i)
    if (!esdf.isSegmentFree(p.waypoints[i], p.waypoints[i + 1], d_c, step)) return false;
  return true;
}

}  // namespace mtp::fixture
