#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mtp/env_map.hpp"
#include "mtp/quad_model.hpp"
#include "mtp/sst.hpp"
#include "mtp/topo_prm.hpp"

namespace mtp {

struct TrajectoryFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rows of the exported trajectory: every integration sub-step that starts
/// a tree edge or changes the input, states at every multiple of dt_out
/// (integrated from the preceding sub-step with its held input), and the
/// final state. A row's input is held until the next row.
std::vector<TrajectorySample> resampleTrajectory(const QuadTrajectory& traj, double dt_out,
                                                 const QuadParams& params);

/// CSV: header t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,f1,f2,f3,f4 and
/// %.9g values.
void writeTrajectoryCsv(std::ostream& out, const std::vector<TrajectorySample>& rows);
void saveTrajectoryCsv(const std::string& path, const std::vector<TrajectorySample>& rows);
std::vector<TrajectorySample> readTrajectoryCsv(std::istream& in);
std::vector<TrajectorySample> loadTrajectoryCsv(const std::string& path);

struct VerifyParams {
  double d_c = 0.2;              // m, clearance of every row
  double r_tol = 0.3;            // m, goal proximity
  double dt_int = 1.0 / 300.0;   // s, longest RK4 step of the consistency check
  double position_tol = 1e-5;    // m
  double velocity_tol = 1e-4;    // m/s
  double attitude_tol = 1e-5;    // rad
  double rate_tol = 1e-3;        // rad/s
};

struct VerifyReport {
  bool ok = true;
  std::vector<std::string> violations;  // first few, human readable
  std::size_t violation_count = 0;
  std::size_t rows = 0;
  double min_clearance = 0.0;    // m, over all rows
  double max_dynamics_error = 0.0;  // m, position mismatch between rows
  std::size_t goals_reached = 0;

  void fail(std::string what);
};

/// Motor limits and body-rate limits (inclusive), clearance d_c at every
/// row, goals visited in order within r_tol, and every row equal to the
/// integration of the previous row's state and held input.
VerifyReport verifyTrajectory(const std::vector<TrajectorySample>& rows, const EsdfGrid& esdf,
                              const GoalSequence& goals, const QuadParams& params,
                              const VerifyParams& verify = {});

}  // namespace mtp
