#include "mtp/velocity_search.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "mtp/errors.hpp"

namespace mtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct EdgeKey {
  std::array<std::uint64_t, 12> bits;
  bool operator==(const EdgeKey&) const = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& k) const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto b : k.bits) {
      h ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

EdgeKey makeKey(const PmState& a, const PmState& b) {
  EdgeKey k;
  for (int i = 0; i < 3; ++i) {
    k.bits[i] = std::bit_cast<std::uint64_t>(a.p[i]);
    k.bits[3 + i] = std::bit_cast<std::uint64_t>(a.v[i]);
    k.bits[6 + i] = std::bit_cast<std::uint64_t>(b.p[i]);
    k.bits[9 + i] = std::bit_cast<std::uint64_t>(b.v[i]);
  }
  return k;
}

// Primitive times memoized over one search; repeated samples across
// refocus rounds are common.
class EdgeCache {
 public:
  explicit EdgeCache(const VelocitySearchParams& params) : params_(params) {}

  double time(const PmState& a, const PmState& b) {
    const EdgeKey key = makeKey(a, b);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    double T = kInf;
    try {
      T = solvePrimitive(a, b, params_.a_max, params_.gravity, params_.search_gd).T;
    } catch (const PlanningError&) {
    }
    ++evaluations_;
    cache_.emplace(key, T);
    return T;
  }
  long evaluations() const { return evaluations_; }

 private:
  const VelocitySearchParams& params_;
  std::unordered_map<EdgeKey, double, EdgeKeyHash> cache_;
  long evaluations_ = 0;
};

LayeredChoice shortestPath(const std::vector<Vec3>& positions,
                           const std::vector<std::vector<Vec3>>& candidates, EdgeCache& cache) {
  const std::size_t n = positions.size();
  std::vector<std::vector<double>> cost(n);
  std::vector<std::vector<int>> parent(n);
  cost[0].assign(candidates[0].size(), 0.0);
  parent[0].assign(candidates[0].size(), -1);
  for (std::size_t l = 1; l < n; ++l) {
    const auto& cur = candidates[l];
    const auto& prev = candidates[l - 1];
    cost[l].assign(cur.size(), kInf);
    parent[l].assign(cur.size(), -1);
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const PmState to{positions[l], cur[j]};
      for (std::size_t k = 0; k < prev.size(); ++k) {
        if (!std::isfinite(cost[l - 1][k])) continue;
        const double c = cost[l - 1][k] + cache.time(PmState{positions[l - 1], prev[k]}, to);
        if (c < cost[l][j]) {  // ties keep the smallest predecessor index
          cost[l][j] = c;
          parent[l][j] = static_cast<int>(k);
        }
      }
    }
    if (std::none_of(cost[l].begin(), cost[l].end(), [](double c) { return std::isfinite(c); }))
      return LayeredChoice{{}, kInf};
  }
  LayeredChoice out;
  out.choice.assign(n, 0);
  int best = 0;
  for (std::size_t j = 1; j < cost[n - 1].size(); ++j)
    if (cost[n - 1][j] < cost[n - 1][best]) best = static_cast<int>(j);
  out.T = cost[n - 1][best];
  for (std::size_t l = n; l-- > 0;) {
    out.choice[l] = best;
    best = parent[l][best];
  }
  return out;
}

}  // namespace

VelocityCone VelocityCone::around(const Vec3& direction, double yaw_half, double pitch_half,
                                  double speed, double speed_half) {
  VelocityCone c;
  const Vec3 d = direction.norm() > 0.0 ? Vec3(direction.normalized()) : Vec3(Vec3::UnitX());
  c.yaw = std::atan2(d.y(), d.x());
  c.pitch = std::asin(std::clamp(d.z(), -1.0, 1.0));
  c.yaw_half = yaw_half;
  c.pitch_half = pitch_half;
  c.speed = std::max(0.0, speed);
  c.speed_half = speed_half;
  return c;
}

Vec3 VelocityCone::centerDirection() const {
  return Vec3(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch));
}

Vec3 VelocityCone::velocity(int yaw_offset, int pitch_offset, int speed_offset) const {
  const double y = yaw + yaw_offset * yaw_half;
  const double p = pitch + pitch_offset * pitch_half;
  const double s = std::max(0.0, speed + speed_offset * speed_half);
  return s * Vec3(std::cos(p) * std::cos(y), std::cos(p) * std::sin(y), std::sin(p));
}

std::array<int, 3> coneOffsets(int sample) {
  if (sample < 0 || sample >= 27) throw std::out_of_range("cone sample index");
  return {sample / 9 - 1, (sample / 3) % 3 - 1, sample % 3 - 1};
}

std::array<Vec3, 27> coneSamples(const VelocityCone& cone) {
  std::array<Vec3, 27> out;
  for (int s = 0; s < 27; ++s) {
    const auto o = coneOffsets(s);
    out[s] = cone.velocity(o[0], o[1], o[2]);
  }
  return out;
}

VelocityCone refocus(const VelocityCone& cone, const std::array<int, 3>& offsets) {
  for (int o : offsets)
    if (o < -1 || o > 1) throw std::invalid_argument("cone offsets must be in {-1,0,1}");
  VelocityCone c = cone;
  if (offsets[0] == 0) c.yaw_half *= 0.5; else c.yaw += offsets[0] * cone.yaw_half;
  if (offsets[1] == 0) c.pitch_half *= 0.5; else c.pitch += offsets[1] * cone.pitch_half;
  if (offsets[2] == 0) {
    c.speed_half *= 0.5;
  } else {
    c.speed = std::max(0.0, cone.speed + offsets[2] * cone.speed_half);
  }
  return c;
}

std::pair<std::size_t, double> PmmTrajectory::locate(double t) const {
  if (primitives.empty()) throw std::logic_error("empty point-mass trajectory");
  double t0 = 0.0;
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const double Ti = primitives[i].T;
    if (t <= t0 + Ti || i + 1 == primitives.size()) return {i, std::clamp(t - t0, 0.0, Ti)};
    t0 += Ti;
  }
  return {primitives.size() - 1, primitives.back().T};
}

PmSample PmmTrajectory::sample(double t) const {
  const auto [i, local] = locate(t);
  return samplePrimitive(primitives[i], local);
}

std::vector<double> PmmTrajectory::knotTimes() const {
  std::vector<double> out{0.0};
  for (const auto& p : primitives) out.push_back(out.back() + p.T);
  return out;
}

LayeredChoice layeredShortestPath(const std::vector<Vec3>& positions,
                                  const std::vector<std::vector<Vec3>>& candidates,
                                  const VelocitySearchParams& params) {
  if (positions.size() != candidates.size() || positions.size() < 2)
    throw std::invalid_argument("one candidate list per position, at least two positions");
  EdgeCache cache(params);
  return shortestPath(positions, candidates, cache);
}

VelocitySearchResult velocitySearch(const std::vector<Vec3>& positions,
                                    const VelocitySearchParams& params) {
  const std::size_t n = positions.size();
  if (n < 2) throw std::invalid_argument("velocity search needs at least two positions");
  VelocitySearchResult result;
  auto& traj = result.trajectory;
  traj.positions = positions;

  // Fixed boundary velocities; one cone per interior position.
  std::vector<VelocityCone> cones(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const Vec3 chord = positions[i + 1] - positions[i - 1];
    const double d = std::min((positions[i + 1] - positions[i]).norm(),
                              (positions[i] - positions[i - 1]).norm());
    const double speed = 0.5 * std::sqrt(params.a_max * d);
    cones[i] = VelocityCone::around(chord, params.initial_angle_half, params.initial_angle_half,
                                    speed, speed);
  }

  EdgeCache cache(params);
  std::vector<std::vector<Vec3>> candidates(n);
  candidates.front() = {params.v_start};
  candidates.back() = {params.v_end};
  LayeredChoice best;
  double prev_T = kInf;
  for (int round = 0; round < std::max(1, params.max_rounds); ++round) {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const auto s = coneSamples(cones[i]);
      candidates[i].assign(s.begin(), s.end());
    }
    const LayeredChoice choice = shortestPath(positions, candidates, cache);
    if (!std::isfinite(choice.T))
      throw PlanningError(PlanningErrorCode::kNoPointMassTrajectory,
                          "a velocity layer has no feasible point-mass primitive");
    best = choice;
    result.round_times.push_back(choice.T);
    result.rounds = round + 1;
    traj.velocities.assign(n, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) traj.velocities[i] = candidates[i][choice.choice[i]];
    if (n == 2 || prev_T - choice.T < params.epsilon) break;
    prev_T = choice.T;
    for (std::size_t i = 1; i + 1 < n; ++i) cones[i] = refocus(cones[i], coneOffsets(choice.choice[i]));
  }
  result.primitive_evaluations = cache.evaluations();

  // Re-solve the chosen chain with the thorough settings; keep whichever
  // primitive is faster so the result is never worse than the graph search.
  traj.primitives.clear();
  traj.T = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const PmState a{positions[i], traj.velocities[i]};
    const PmState b{positions[i + 1], traj.velocities[i + 1]};
    PmmPrimitive prim = solvePrimitive(a, b, params.a_max, params.gravity, params.final_gd);
    if (params.search_gd.fan_probe != params.final_gd.fan_probe ||
        params.search_gd.coarse_start != params.final_gd.coarse_start) {
      PmmPrimitive quick = solvePrimitive(a, b, params.a_max, params.gravity, params.search_gd);
      if (quick.T < prim.T) prim = std::move(quick);
    }
    traj.T += prim.T;
    traj.primitives.push_back(std::move(prim));
  }
  return result;
}

}  // namespace mtp
