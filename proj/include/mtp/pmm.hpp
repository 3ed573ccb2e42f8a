#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mtp/env_map.hpp"

namespace mtp {

struct PmState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
};

/// Two-phase constant-acceleration profile on one axis: a1 on [0,t1],
/// a2 on [t1,T]. Accelerations are signed.
struct AxisSolution {
  double a1 = 0.0;
  double a2 = 0.0;
  double t1 = 0.0;
  double T = 0.0;

  double switchTime() const { return t1; }
  /// Position, velocity and acceleration at time t (clamped to [0,T]).
  std::array<double, 3> sample(double ps, double vs, double t) const;
};

struct AxisBoundary {
  double ps = 0.0;
  double vs = 0.0;
  double pe = 0.0;
  double ve = 0.0;
};

/// Minimum-time two-phase profile with +a_plus / -a_minus available, in
/// either order. nullopt when neither ordering meets the boundary.
std::optional<AxisSolution> solveAxis(double ps, double vs, double pe, double ve,
                                      double a_plus, double a_minus);

/// Same boundary, total time exactly t_target, phase accelerations scaled
/// down by a common factor in [0,1]. Throws if t_target < sol.T.
std::optional<AxisSolution> stretchAxis(const AxisSolution& sol, const AxisBoundary& bnd,
                                        double t_target);

/// Per-axis solution when thrust component `thrust` acts together with the
/// gravity component `g`: phase accelerations are thrust + g and -thrust + g.
std::optional<AxisSolution> solveAxisWithThrust(const AxisBoundary& bnd, double thrust,
                                                double g);

/// d T / d |thrust| of solveAxisWithThrust, closed form where defined.
double axisTimeGradient(const AxisBoundary& bnd, double thrust, double g);

struct GdParams {
  int max_iters = 200;
  double step_tol = 1e-6;  // relative to a_max
  double beta = 0.5;
  int max_halvings = 20;
  // Second descent from the best of a coarse direction scan.
  bool coarse_start = true;
  // Probe a fan of tangent directions when the gradient steps stall.
  bool fan_probe = true;
};

struct PmmPrimitive {
  std::array<AxisSolution, 3> axes;
  Vec3 a_t = Vec3::Zero();  // thrust acceleration at the optimum, |a_t| = a_max
  double T = 0.0;
  PmState start;
  PmState end;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_trace;  // T at every accepted iterate
};

/// max_i T_i for the given thrust vector, +inf when any axis is infeasible.
double primitiveCost(const PmState& start, const PmState& end, const Vec3& a_t,
                     const Vec3& g);

/// Projected gradient descent on the sphere |a_t| = a_max, followed by time
/// stretching of the faster axes. Throws PlanningError (kInfeasiblePrimitive)
/// when no feasible iterate or no stretch exists.
PmmPrimitive solvePrimitive(const PmState& start, const PmState& end, double a_max,
                            const Vec3& g, const GdParams& gd = {});

struct PmSample {
  Vec3 p;
  Vec3 v;
  Vec3 a;
};

PmSample samplePrimitive(const PmmPrimitive& prim, double t);

/// Times in (0,T) at which some axis switches acceleration, sorted.
std::vector<double> primitiveSwitchTimes(const PmmPrimitive& prim);

}  // namespace mtp
