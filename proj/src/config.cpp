#include "mtp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <variant>

namespace mtp {

namespace {

struct InsertionRuleRef {
  InsertionRule* value;
};

using FieldRef =
  std::variant<double*, int*, long*, bool*, std::string*, Vec3*, InsertionRuleRef>;

struct Field {
  const char* key;
  FieldRef ref;
};

// The single table of keys; its order is the serialization order.
std::vector<Field> fields(PlannerConfig& c) {
  return {
    {"quad.mass", &c.quad.mass},
    {"quad.inertia", &c.quad.inertia},
    {"quad.arm_length", &c.quad.arm_length},
    {"quad.kappa", &c.quad.kappa},
    {"quad.f_min", &c.quad.f_min},
    {"quad.f_max", &c.quad.f_max},
    {"quad.w_max", &c.quad.w_max},
    {"quad.gravity", &c.quad.gravity},

    {"plan.d_c", &c.d_c},
    {"plan.r_tol", &c.r_tol},
    {"plan.d_sat", &c.d_sat},
    {"plan.dt_out", &c.dt_out},
    {"plan.seed", &c.seed},
    {"plan.log_level", &c.log_level},

    {"stages.run_sst", &c.run_sst},
    {"stages.dump_paths", &c.dump_paths},
    {"stages.dump_pmm", &c.dump_pmm},
    {"stages.dump_tree", &c.dump_tree},

    {"paths.map", &c.map_path},
    {"paths.waypoints", &c.waypoints_path},
    {"paths.out_dir", &c.out_dir},
    {"paths.esdf_cache", &c.esdf_cache},

    {"topo.segment_step", &c.topo.segment_step},
    {"topo.k_neighbors", &c.topo.k_neighbors},
    {"topo.initial_samples", &c.topo.initial_samples},
    {"topo.sample_growth", &c.topo.sample_growth},
    {"topo.axis_growth", &c.topo.axis_growth},
    {"topo.initial_axis_ratio", &c.topo.initial_axis_ratio},
    {"topo.max_rounds", &c.topo.max_rounds},
    {"topo.uvd_checks", &c.topo.uvd_checks},
    {"topo.length_factor", &c.topo.length_factor},
    {"topo.max_paths", &c.topo.max_paths},
    {"topo.use_direction_filter", &c.topo.use_direction_filter},
    {"topo.max_recursion_depth", &c.topo.max_recursion_depth},
    {"topo.max_paths_per_search", &c.topo.max_paths_per_search},

    {"pmm.a_max_scale", &c.a_max_scale},
    {"pmm.v_start", &c.pmm.velocity.v_start},
    {"pmm.v_end", &c.pmm.velocity.v_end},
    {"pmm.epsilon", &c.pmm.velocity.epsilon},
    {"pmm.max_rounds", &c.pmm.velocity.max_rounds},
    {"pmm.initial_angle_half", &c.pmm.velocity.initial_angle_half},
    {"pmm.gd_max_iters", &c.pmm.velocity.final_gd.max_iters},
    {"pmm.gd_step_tol", &c.pmm.velocity.final_gd.step_tol},
    {"pmm.search_gd_max_iters", &c.pmm.velocity.search_gd.max_iters},
    {"pmm.search_gd_step_tol", &c.pmm.velocity.search_gd.step_tol},
    {"pmm.dt_cc", &c.pmm.dt_cc},
    {"pmm.max_insertions_per_segment", &c.pmm.max_insertions_per_segment},
    {"pmm.max_expansions", &c.pmm.max_expansions},
    {"pmm.insertion", InsertionRuleRef{&c.pmm.insertion}},

    {"guide.sample_dt", &c.guide.sample_dt},
    {"guide.min_slice", &c.guide.min_slice},
    {"guide.input_step", &c.guide.input_step},
    {"guide.absorb_ratio", &c.guide.absorb_ratio},

    {"sst.delta_s", &c.sst.delta_s},
    {"sst.delta_bn", &c.sst.delta_bn},
    {"sst.sigma2_p", &c.sst.sigma2_p},
    {"sst.sigma2_q", &c.sst.sigma2_q},
    {"sst.sigma2_v", &c.sst.sigma2_v},
    {"sst.sigma2_w", &c.sst.sigma2_w},
    {"sst.sigma2_qrot", &c.sst.sigma2_qrot},
    {"sst.s_rmin", &c.sst.s_rmin},
    {"sst.s_rmax", &c.sst.s_rmax},
    {"sst.t_min", &c.sst.t_min},
    {"sst.t_max", &c.sst.t_max},
    {"sst.r_pmm", &c.sst.r_pmm},
    {"sst.delta_ref", &c.sst.delta_ref},
    {"sst.p_g", &c.sst.p_g},
    {"sst.dt_int", &c.sst.dt_int},
    {"sst.max_iters", &c.sst.max_iters},
    {"sst.stall_iters", &c.sst.stall_iters},
    {"sst.log_stride", &c.sst.log_stride},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parseDouble(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("'" + key + "': expected a number, got '" + text + "'");
  return v;
}

template <class Int>
Int parseInt(const std::string& key, const std::string& text) {
  // accept integral values written in floating notation, e.g. 2e5
  const double d = parseDouble(key, text);
  const Int v = static_cast<Int>(d);
  if (static_cast<double>(v) != d)
    throw ConfigError("'" + key + "': expected an integer, got '" + text + "'");
  return v;
}

bool parseBool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + text + "'");
}

Vec3 parseVec3(const std::string& key, const std::string& text) {
  std::stringstream ss(text);
  std::string a, b, c, extra;
  if (!(ss >> a >> b >> c) || (ss >> extra))
    throw ConfigError("'" + key + "': expected three numbers, got '" + text + "'");
  return Vec3(parseDouble(key, a), parseDouble(key, b), parseDouble(key, c));
}

std::string formatDouble(double v) {
  // shortest representation that parses back to the same value
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::string> configKeys() {
  PlannerConfig c;
  std::vector<std::string> keys;
  for (const auto& f : fields(c)) keys.emplace_back(f.key);
  return keys;
}

void setConfigValue(PlannerConfig& config, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  for (auto& f : fields(config)) {
    if (key != f.key) continue;
    std::visit(
      [&](auto ref) {
        using R = decltype(ref);
        if constexpr (std::is_same_v<R, InsertionRuleRef>) {
          if (value == "mid_arc") *ref.value = InsertionRule::kMidArc;
          else if (value == "farthest") *ref.value = InsertionRule::kFarthest;
          else throw ConfigError("'" + key + "': expected mid_arc or farthest, got '" + value + "'");
        } else {
          using T = std::remove_pointer_t<R>;
          if constexpr (std::is_same_v<T, double>) *ref = parseDouble(key, value);
          else if constexpr (std::is_same_v<T, int>) *ref = parseInt<int>(key, value);
          else if constexpr (std::is_same_v<T, long>) *ref = parseInt<long>(key, value);
          else if constexpr (std::is_same_v<T, bool>) *ref = parseBool(key, value);
          else if constexpr (std::is_same_v<T, std::string>) *ref = value;
          else if constexpr (std::is_same_v<T, Vec3>) *ref = parseVec3(key, value);
        }
      },
      f.ref);
    return;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

PlannerConfig parseConfig(std::istream& in, PlannerConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    try {
      setConfigValue(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

PlannerConfig loadConfig(const std::string& path, PlannerConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  return parseConfig(in, std::move(base));
}

void writeConfig(std::ostream& out, const PlannerConfig& config) {
  PlannerConfig copy = config;
  for (auto& f : fields(copy)) {
    out << f.key << " = ";
    std::visit(
      [&](auto ref) {
        using R = decltype(ref);
        if constexpr (std::is_same_v<R, InsertionRuleRef>) {
          out << (*ref.value == InsertionRule::kMidArc ? "mid_arc" : "farthest");
        } else {
          using T = std::remove_pointer_t<R>;
          if constexpr (std::is_same_v<T, double>) out << formatDouble(*ref);
          else if constexpr (std::is_same_v<T, bool>) out << (*ref ? "true" : "false");
          else if constexpr (std::is_same_v<T, Vec3>)
            out << formatDouble(ref->x()) << ' ' << formatDouble(ref->y()) << ' '
                << formatDouble(ref->z());
          else out << *ref;
        }
      },
      f.ref);
    out << '\n';
  }
}

void PlannerConfig::propagateShared() {
  topo.d_c = d_c;
  pmm.d_c = d_c;
  sst.d_c = d_c;
  pmm.velocity.a_max = a_max_scale * quad.maxThrustAccel();
  pmm.velocity.gravity = quad.gravity;
}

void PlannerConfig::validate() const {
  std::vector<std::string> errors;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) errors.push_back(what);
  };
  try {
    quad.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  try {
    sst.validate();
  } catch (const std::exception& e) {
    errors.emplace_back(e.what());
  }
  require(d_c >= 0.0, "plan.d_c must be >= 0");
  require(r_tol > 0.0, "plan.r_tol must be positive");
  require(d_sat > 0.0, "plan.d_sat must be positive");
  require(dt_out > 0.0, "plan.dt_out must be positive");
  require(a_max_scale > 0.0 && a_max_scale <= 1.0, "pmm.a_max_scale must be in (0, 1]");
  require(pmm.dt_cc > 0.0, "pmm.dt_cc must be positive");
  require(pmm.max_expansions >= 1, "pmm.max_expansions must be >= 1");
  require(pmm.max_insertions_per_segment >= 0, "pmm.max_insertions_per_segment must be >= 0");
  require(pmm.velocity.max_rounds >= 1, "pmm.max_rounds must be >= 1");
  require(pmm.velocity.epsilon > 0.0, "pmm.epsilon must be positive");
  require(pmm.velocity.initial_angle_half > 0.0 && pmm.velocity.initial_angle_half <= M_PI,
          "pmm.initial_angle_half must be in (0, pi]");
  require(topo.k_neighbors >= 1, "topo.k_neighbors must be >= 1");
  require(topo.initial_samples >= 1, "topo.initial_samples must be >= 1");
  require(topo.sample_growth >= 1.0, "topo.sample_growth must be >= 1");
  require(topo.axis_growth >= 1.0, "topo.axis_growth must be >= 1");
  require(topo.initial_axis_ratio > 1.0, "topo.initial_axis_ratio must be > 1");
  require(topo.max_rounds >= 1, "topo.max_rounds must be >= 1");
  require(topo.uvd_checks >= 1, "topo.uvd_checks must be >= 1");
  require(topo.length_factor >= 1.0, "topo.length_factor must be >= 1");
  require(topo.max_paths >= 1, "topo.max_paths must be >= 1");
  require(guide.sample_dt > 0.0, "guide.sample_dt must be positive");
  require(guide.min_slice >= 0.0, "guide.min_slice must be >= 0");
  require(guide.input_step >= 0.0, "guide.input_step must be >= 0");
  require(guide.absorb_ratio >= 0.0, "guide.absorb_ratio must be >= 0");
  require(log_level == "off" || log_level == "error" || log_level == "warn" ||
            log_level == "info" || log_level == "debug" || log_level == "trace",
          "plan.log_level must be off, error, warn, info, debug or trace");
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

}  // namespace mtp
