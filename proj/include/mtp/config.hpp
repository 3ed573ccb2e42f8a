#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtp/guide.hpp"
#include "mtp/pmm_search.hpp"
#include "mtp/quad_model.hpp"
#include "mtp/sst.hpp"
#include "mtp/topo_prm.hpp"

namespace mtp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Every tunable of the three planning stages plus I/O settings. Defaults
/// reproduce the reference quadrotor and algorithm parameters, so an empty
/// configuration file is valid.
struct PlannerConfig {
  PlannerConfig() { sst.log_stride = 1000; }

  QuadParams quad;
  TopoParams topo;
  PointMassSearchParams pmm;
  double a_max_scale = 1.0;  // point-mass thrust limit relative to 4 f_max / m
  GuideParams guide;
  SstParams sst;

  double d_c = 0.2;   // m, clearance used by every stage
  double r_tol = 0.3; // m, goal proximity
  double d_sat = 2.0; // m, ESDF saturation distance
  double dt_out = 0.01;  // s, dense resampling of the exported trajectory
  long seed = 1;

  bool run_sst = true;     // false: stop after the point-mass stage
  bool dump_paths = true;  // stage-1 JSON-lines dump
  bool dump_pmm = true;    // stage-2 JSON-lines dump
  bool dump_tree = false;  // final search tree as polylines

  std::string map_path;
  std::string waypoints_path;
  std::string out_dir = ".";
  std::string esdf_cache;  // optional precomputed ESDF
  std::string log_level = "info";

  /// Copies the shared values (d_c, r_tol, thrust limit, gravity) into the
  /// per-stage parameter blocks.
  void propagateShared();
  /// Throws ConfigError listing every parameter outside its range.
  void validate() const;
};

/// Flat `key = value` lines, `#` comments, dotted section prefixes
/// (`sst.delta_bn = 1.3`). Unknown keys and malformed values throw
/// ConfigError. Keys not present keep their defaults.
PlannerConfig parseConfig(std::istream& in, PlannerConfig base = {});
PlannerConfig loadConfig(const std::string& path, PlannerConfig base = {});
/// Every key in a fixed order with round-trip precision.
void writeConfig(std::ostream& out, const PlannerConfig& config);
/// Sets one key from its text value (same syntax as a config line).
void setConfigValue(PlannerConfig& config, const std::string& key, const std::string& value);
std::vector<std::string> configKeys();

}  // namespace mtp
