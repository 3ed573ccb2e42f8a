#pragma once

#include <array>
#include <vector>

#include "mtp/pmm.hpp"

namespace mtp {

/// 3x3x3 velocity samples around (yaw, pitch, speed). Angles in rad,
/// speeds in m/s.
struct VelocityCone {
  double yaw = 0.0;
  double pitch = 0.0;
  double yaw_half = 0.0;
  double pitch_half = 0.0;
  double speed = 0.0;
  double speed_half = 0.0;

  static VelocityCone around(const Vec3& direction, double yaw_half, double pitch_half,
                             double speed, double speed_half);
  Vec3 centerDirection() const;
  Vec3 velocity(int yaw_offset, int pitch_offset, int speed_offset) const;
};

/// Offsets in {-1,0,+1} for (yaw, pitch, speed) of sample index 0..26.
std::array<int, 3> coneOffsets(int sample);

/// All 27 samples, index = 9*(yaw+1) + 3*(pitch+1) + (speed+1).
std::array<Vec3, 27> coneSamples(const VelocityCone& cone);

/// Boundary sample used -> shift that dimension's center by one half-range;
/// center sample used -> halve that half-range.
VelocityCone refocus(const VelocityCone& cone, const std::array<int, 3>& offsets);

struct PmmTrajectory {
  std::vector<PmmPrimitive> primitives;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;  // one per position
  double T = 0.0;

  /// Primitive index containing time t and the local time inside it.
  std::pair<std::size_t, double> locate(double t) const;
  PmSample sample(double t) const;
  /// Start time of every primitive plus the final time.
  std::vector<double> knotTimes() const;
};

struct VelocitySearchParams {
  double a_max = 4.0 * 7.0 / 0.85;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  Vec3 v_start = Vec3::Zero();
  Vec3 v_end = Vec3::Zero();
  double epsilon = 1e-3;  // s, convergence of the total time
  int max_rounds = 30;
  double initial_angle_half = M_PI / 3.0;
  GdParams search_gd{200, 1e-4, 0.5, 20, false, false};  // edges inside the graph search
  GdParams final_gd{};                                   // primitives of the result
};

struct VelocitySearchResult {
  PmmTrajectory trajectory;
  std::vector<double> round_times;  // best total time after every round
  int rounds = 0;
  long primitive_evaluations = 0;
};

/// Layered-graph shortest path over cone samples with iterative refocusing.
/// Throws PlanningError(kNoPointMassTrajectory) if some layer is entirely
/// infeasible.
VelocitySearchResult velocitySearch(const std::vector<Vec3>& positions,
                                    const VelocitySearchParams& params);

/// Minimum total time over fixed per-layer velocity candidates (layer 0
/// and the last layer hold exactly one velocity). Returns the chosen sample
/// index per layer and the total time; +inf if no feasible chain exists.
struct LayeredChoice {
  std::vector<int> choice;
  double T = 0.0;
};
LayeredChoice layeredShortestPath(const std::vector<Vec3>& positions,
                                  const std::vector<std::vector<Vec3>>& candidates,
                                  const VelocitySearchParams& params);

}  // namespace mtp
