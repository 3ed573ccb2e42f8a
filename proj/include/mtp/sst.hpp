#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mtp/env_map.hpp"
#include "mtp/guide.hpp"
#include "mtp/quad_model.hpp"
#include "mtp/topo_prm.hpp"

namespace mtp {

struct SstParams {
  double d_c = 0.2;           // m
  double delta_s = 0.5;       // witness radius in the state metric
  double delta_bn = 1.3;      // best-near radius in the state metric
  double sigma2_p = 1.3;      // m^2
  double sigma2_q = 0.08;     // rad^2
  double sigma2_v = 8.3;      // m^2/s^2
  double sigma2_w = 8.3;      // rad^2/s^2
  double sigma2_qrot = 0.013; // rad^2, rotation axis noise
  double s_rmin = 0.6;
  double s_rmax = 1.4;
  double t_min = 0.004;  // s
  double t_max = 1.2;    // s
  double r_pmm = 1.05;
  double delta_ref = 2.0;  // m
  double p_g = 0.05;
  double dt_int = 1.0 / 300.0;  // s
  long max_iters = 2000000;
  long stall_iters = 200000;
  // Search log: every log_stride-th iteration plus every accepted one;
  // 0 records nothing.
  long log_stride = 0;

  void validate() const;
};

/// d(x,y)^2 = |dp|^2/s_p + angle^2/s_q + |dv|^2/s_v + |dw|^2/s_w.
struct StateMetric {
  double inv_p = 1.0, inv_q = 1.0, inv_v = 1.0, inv_w = 1.0;

  static StateMetric fromParams(const SstParams& p) {
    return StateMetric{1.0 / p.sigma2_p, 1.0 / p.sigma2_q, 1.0 / p.sigma2_v, 1.0 / p.sigma2_w};
  }
  double distance(const QuadState& a, const QuadState& b) const;
  /// Lower bound of a metric ball radius expressed in position, m.
  double positionRadius(double r) const { return r / std::sqrt(inv_p); }
  /// Squared distance, or any value above `bound2` once it is certain to
  /// exceed it (skips the attitude term).
  double squaredDistanceBounded(const QuadState& a, const QuadState& b, double bound2) const;
};

/// Everything needed to regenerate an edge's input sequence: the guide
/// time it starts from, one time scale per nominal phase and one axis
/// perturbation per rotation it crosses.
struct EdgeSpec {
  double guide_t0 = 0.0;
  int steps = 0;
  std::vector<double> scales;
  std::vector<double> axis_angles;  // rad, rotation of the axis inside the body x-y plane
};

struct TreeNode {
  QuadState x;
  double cost = 0.0;  // s from the start
  int parent = -1;
  EdgeSpec edge;
  int goal = 0;       // number of goals reached after the start
  int children = 0;
  bool active = true;
  bool removed = false;
  double guide_t = 0.0;  // nearest guide time, propagation starts here
};

struct Witness {
  QuadState center;
  int rep = -1;
};

/// Positional hash grid over metric states; radius and nearest queries in
/// the state metric are exact.
class StateIndex {
 public:
  StateIndex(double cell, StateMetric metric) : cell_(cell), metric_(metric) {}

  void insert(int id, const QuadState& x);
  void remove(int id, const QuadState& x);
  std::size_t size() const { return count_; }
  /// Ids whose positions lie within `radius_p` of p (plus cell slack filtered).
  void positionQuery(const Vec3& p, double radius_p, const std::function<void(int)>& visit) const;
  /// Ids within metric distance r of x.
  std::vector<int> within(const QuadState& x, double r,
                          const std::function<const QuadState&(int)>& state) const;
  /// Nearest id in the metric, -1 if empty.
  int nearest(const QuadState& x, const std::function<const QuadState&(int)>& state) const;

 private:
  using Key = std::uint64_t;
  Key key(int ix, int iy, int iz) const;
  std::array<int, 3> cellOf(const Vec3& p) const;

  double cell_;
  StateMetric metric_;
  std::unordered_map<Key, std::vector<int>> cells_;
  std::size_t count_ = 0;
  std::array<int, 3> lo_{0, 0, 0}, hi_{-1, -1, -1};  // occupied cell bounds
};

struct TrajectorySample {
  double t = 0.0;
  QuadState x;
  MotorCommand f = MotorCommand::Zero();  // input held until the next sample
  bool node = false;                      // tree node (control switch point)
};

struct QuadTrajectory {
  std::vector<TrajectorySample> samples;
  double T = 0.0;
};

struct SstLogEntry {
  long iteration = 0;
  int goal = 0;
  bool accepted = false;
  std::size_t tree_size = 0;
  std::size_t witnesses = 0;
  double best_T = 0.0;
};

struct SstStats {
  long iterations = 0;
  long accepted = 0;
  long rejected_limits = 0;
  long rejected_passing = 0;
  long rejected_local = 0;
  long pruned = 0;
  int best_goal = 0;  // most goals reached after the start
  double best_T = 0.0;
  bool solved = false;
};

struct SstResult {
  QuadTrajectory trajectory;  // empty unless stats.solved
  QuadTrajectory partial;     // cheapest branch reaching stats.best_goal when unsolved
  SstStats stats;
  std::vector<SstLogEntry> log;
};

/// Propagated candidate before the acceptance tests.
struct Candidate {
  QuadState x;
  EdgeSpec edge;
  double cost = 0.0;
  int goal = 0;
  bool collision_free = true;
};

/// Multi-goal SST over the full quadrotor model, sampling and propagating
/// around a guide reference.
class GuidedSst {
 public:
  /// goal_times: guide time of every goal (first 0, last the guide end).
  GuidedSst(const GuideReference& guide, const GoalSequence& goals,
            std::vector<double> goal_times, const EsdfGrid& esdf, const SstParams& params,
            std::uint64_t seed);

  /// Runs until the iteration cap or the stall limit.
  SstResult run();
  /// One loop iteration; returns true if a node was added.
  bool iterate();
  bool shouldStop() const;

  // --- building blocks ---------------------------------------------------
  int randomGoalIndex();
  QuadState sampleGuideState(int level);
  int bestNearSelection(int level);
  /// Min-cost active node of `level` within delta_bn of q, else the nearest;
  /// restricted to `pool` when it is non-empty.
  int bestNear(int level, const QuadState& q, const std::vector<int>& pool) const;
  std::optional<Candidate> propagate(int node);
  bool isPassing(const Candidate& c) const;
  /// Nearest witness within delta_s or a new witness; returns the witness
  /// index and whether the candidate may enter the tree.
  std::pair<int, bool> isLocalBest(const QuadState& x, double cost, int level);
  void pruneNodes(int node, int level, int witness);
  int addNode(int parent, const Candidate& c);

  /// Guide time nearest a state within the guide window of `level`.
  double nearestGuideTime(const QuadState& x, int level) const;
  /// Guide sample nearest in position within the window of `level`.
  std::pair<double, double> nearestGuidePosition(const Vec3& p, int level) const;
  std::pair<double, double> window(int level) const;

  /// Input of every sub-step of an edge; draws (and records) scales and
  /// axis perturbations when `rng` is set.
  std::vector<MotorCommand> edgeCommands(EdgeSpec& edge, int substeps, Rng* rng) const;
  std::vector<MotorCommand> edgeCommands(const EdgeSpec& edge) const;
  /// Final state of re-propagating a node's edge with each sub-step split
  /// into `refine` RK4 steps.
  QuadState repropagate(int node, int refine) const;

  QuadTrajectory extract(int node) const;
  int bestFinal() const { return best_final_; }
  /// Cheapest live node among those that reached the most goals.
  int bestProgressNode() const;
  double bestCost() const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<std::vector<Witness>>& witnesses() const { return witnesses_; }
  const StateMetric& metric() const { return metric_; }
  const SstStats& stats() const { return stats_; }
  int levels() const { return static_cast<int>(goals_.size()); }
  int doneLevel() const { return static_cast<int>(goals_.size()) - 1; }
  std::size_t liveNodes() const { return live_; }
  Rng& rng() { return rng_; }

 private:
  void activate(int id);
  void deactivate(int id);
  void removeCascade(int id);
  int reachedGoal(const Vec3& p, int level) const;

  const GuideReference& guide_;
  GoalSequence goals_;
  std::vector<double> goal_times_;
  const EsdfGrid& esdf_;
  SstParams params_;
  QuadParams quad_;
  StateMetric metric_;
  Rng rng_;

  std::vector<TreeNode> nodes_;
  std::vector<StateIndex> active_;   // per level
  std::vector<std::vector<Witness>> witnesses_;
  std::vector<StateIndex> witness_index_;
  std::vector<int> active_count_;
  std::size_t live_ = 0;
  int best_final_ = -1;
  long last_improvement_ = 0;
  SstStats stats_;
  std::vector<SstLogEntry> log_;
};

/// Guide times of the goals: 0 for the start, the guide end for the last
/// goal, and the arrival time of the point-mass translation otherwise.
std::vector<double> goalGuideTimes(const GuideReference& guide, const PmmTrajectory& pm,
                                   const std::vector<std::size_t>& goal_index);

}  // namespace mtp
