#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "mtp/env_map.hpp"

namespace mtp {

using Rng = std::mt19937_64;

/// Ordered goal positions [start, waypoints..., end] with pass tolerance.
struct GoalSequence {
  struct PassDirection {
    Vec3 direction;    // unit vector
    double max_angle;  // rad
  };

  std::vector<Vec3> positions;
  double r_tol = 0.3;
  std::vector<std::optional<PassDirection>> directions;  // empty or one per goal

  std::size_t size() const { return positions.size(); }
  std::optional<PassDirection> directionAt(std::size_t i) const {
    return i < directions.size() ? directions[i] : std::nullopt;
  }
};

struct TopoPath {
  std::vector<Vec3> waypoints;
  double length = 0.0;

  static TopoPath fromWaypoints(std::vector<Vec3> waypoints);
  /// Point at normalized arc length s in [0,1].
  Vec3 pointAt(double s) const;
  /// Normalized arc length of the closest point on the polyline.
  double project(const Vec3& p) const;
};

struct Roadmap {
  struct Edge {
    int to;
    double length;
  };
  std::vector<Vec3> vertices;
  std::vector<std::vector<Edge>> adjacency;

  int addVertex(const Vec3& p);
  void addEdge(int a, int b);
  bool hasEdge(int a, int b) const;
  bool connected(int from, int to) const;
};

struct TopoParams {
  double d_c = 0.2;
  double segment_step = 0.0;  // <= 0: half the map resolution
  int k_neighbors = 12;
  int initial_samples = 300;
  double sample_growth = 1.5;
  double axis_growth = 1.3;
  double initial_axis_ratio = 1.2;
  int max_rounds = 8;
  int uvd_checks = 32;
  double length_factor = 3.0;
  int max_paths = 5;
  bool use_direction_filter = false;
  int max_recursion_depth = 3;
  int max_paths_per_search = 256;

  double step(const EsdfGrid& esdf) const {
    return segment_step > 0.0 ? segment_step : 0.5 * esdf.geometry().resolution;
  }
};

/// Uniform samples inside the prolate spheroid with foci a, b and the given
/// full major-axis length. Samples rejected by `accept` are redrawn.
std::vector<Vec3> sampleInformed(const Vec3& a, const Vec3& b, double major_axis,
                                 int n, Rng& rng,
                                 const std::function<bool(const Vec3&)>& accept = {});

/// Vertex 0 is `a`, vertex 1 is `b`. Sample count and major axis grow each
/// round until a and b are connected.
Roadmap buildRoadmap(const Vec3& a, const Vec3& b, const EsdfGrid& esdf,
                     const TopoParams& params, Rng& rng);

/// Repeated shortest-path search with clearance-ball node removal and
/// recursive reconnection through the removed nodes.
std::vector<TopoPath> findDistinctPaths(const Roadmap& roadmap,
                                        const std::vector<int>& starts,
                                        const std::vector<int>& ends,
                                        const EsdfGrid& esdf,
                                        const TopoParams& params);

/// Greedy visibility shortcutting, forward then backward.
TopoPath shortenPath(const TopoPath& path, const EsdfGrid& esdf, double d_c,
                     double step);

bool uvdEquivalent(const TopoPath& p1, const TopoPath& p2, int n_checks,
                   const EsdfGrid& esdf, double d_c, double step);

/// Keeps UVD-unique paths no longer than length_factor times the shortest,
/// at most max_paths of them (shortest first). With `arrival` set, paths
/// whose final segment deviates more than its max_angle are dropped.
std::vector<TopoPath> filterPaths(
  std::vector<TopoPath> paths, const EsdfGrid& esdf, const TopoParams& params,
  const std::optional<GoalSequence::PassDirection>& arrival = std::nullopt);

/// One filtered path list per adjacent goal pair. Each segment uses its own
/// generator stream derived from (seed, segment index).
std::vector<std::vector<TopoPath>> topologicalPaths(const GoalSequence& goals,
                                                    const EsdfGrid& esdf,
                                                    const TopoParams& params,
                                                    std::uint64_t seed);

Rng segmentRng(std::uint64_t seed, std::uint64_t stream);

}  // namespace mtp
