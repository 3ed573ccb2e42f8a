#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "mtp/env_map.hpp"
#include "mtp/topo_prm.hpp"

namespace mtp {

struct MapFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Text occupancy map:
//   voxmap 1
//   dims nx ny nz
//   res r
//   origin ox oy oz
//   data 01-rle
//   <count> <0|1> ...        (x-fastest order)
OccupancyGrid readVoxmap(std::istream& in);
OccupancyGrid loadVoxmap(const std::string& path);
void writeVoxmap(std::ostream& out, const OccupancyGrid& grid);
void saveVoxmap(const std::string& path, const OccupancyGrid& grid);

// ESDF sidecar: the same four header lines, then `data f32-le <d_sat>` and
// the raw little-endian float32 payload in x-fastest order.
void writeEsdfCache(std::ostream& out, const EsdfGrid& esdf);
void saveEsdfCache(const std::string& path, const EsdfGrid& esdf);
EsdfGrid readEsdfCache(std::istream& in);
EsdfGrid loadEsdfCache(const std::string& path);

// Goal file: one goal per line `x y z [dx dy dz max_angle_rad]` (optional
// pass direction, normalized on read), `#` starts a comment.
GoalSequence readGoals(std::istream& in, double r_tol);
GoalSequence loadGoals(const std::string& path, double r_tol);
void writeGoals(std::ostream& out, const GoalSequence& goals);
void saveGoals(const std::string& path, const GoalSequence& goals);

}  // namespace mtp
