#include "mtp/topo_prm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <stdexcept>

#include "mtp/errors.hpp"

namespace mtp {

TopoPath TopoPath::fromWaypoints(std::vector<Vec3> waypoints) {
  TopoPath path;
  path.waypoints = std::move(waypoints);
  for (std::size_t i = 1; i < path.waypoints.size(); ++i)
    path.length += (path.waypoints[i] - path.waypoints[i - 1]).norm();
  return path;
}

Vec3 TopoPath::pointAt(double s) const {
  if (waypoints.empty()) throw std::logic_error("pointAt on empty path");
  if (waypoints.size() == 1 || length <= 0.0) return waypoints.front();
  const double target = std::clamp(s, 0.0, 1.0) * length;
  double acc = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const double seg = (waypoints[i] - waypoints[i - 1]).norm();
    if (acc + seg >= target && seg > 0.0) {
      const double t = (target - acc) / seg;
      return waypoints[i - 1] + t * (waypoints[i] - waypoints[i - 1]);
    }
    acc += seg;
  }
  return waypoints.back();
}

double TopoPath::project(const Vec3& p) const {
  if (waypoints.size() < 2 || length <= 0.0) return 0.0;
  double best_d = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i < waypoints.size(); ++i) {
    const Vec3 d = waypoints[i] - waypoints[i - 1];
    const double seg = d.norm();
    double t = 0.0;
    if (seg > 0.0) t = std::clamp((p - waypoints[i - 1]).dot(d) / (seg * seg), 0.0, 1.0);
    const double dist = (waypoints[i - 1] + t * d - p).norm();
    if (dist < best_d) {
      best_d = dist;
      best_s = (acc + t * seg) / length;
    }
    acc += seg;
  }
  return best_s;
}

int Roadmap::addVertex(const Vec3& p) {
  vertices.push_back(p);
  adjacency.emplace_back();
  return static_cast<int>(vertices.size()) - 1;
}

bool Roadmap::hasEdge(int a, int b) const {
  for (const auto& e : adjacency[a])
    if (e.to == b) return true;
  return false;
}

void Roadmap::addEdge(int a, int b) {
  if (a == b || hasEdge(a, b)) return;
  const double len = (vertices[a] - vertices[b]).norm();
  adjacency[a].push_back({b, len});
  adjacency[b].push_back({a, len});
}

bool Roadmap::connected(int from, int to) const {
  std::vector<char> seen(vertices.size(), 0);
  std::vector<int> stack{from};
  seen[from] = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (const auto& e : adjacency[v])
      if (!seen[e.to]) {
        seen[e.to] = 1;
        stack.push_back(e.to);
      }
  }
  return false;
}

Rng segmentRng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32), 0x70b0u};
  return Rng(seq);
}

std::vector<Vec3> sampleInformed(const Vec3& a, const Vec3& b, double major_axis,
                                 int n, Rng& rng,
                                 const std::function<bool(const Vec3&)>& accept) {
  const double focal = (b - a).norm();
  if (!(major_axis >= focal * (1.0 - 1e-12)))
    throw std::invalid_argument("major axis shorter than focal distance");
  std::vector<Vec3> out;
  if (n <= 0) return out;
  out.reserve(n);

  const double semi_major = 0.5 * major_axis;
  const double semi_minor =
    std::sqrt(std::max(0.0, semi_major * semi_major - 0.25 * focal * focal));
  const Vec3 center = 0.5 * (a + b);
  Vec3 u = focal > 0.0 ? Vec3((b - a) / focal) : Vec3::UnitX();
  Vec3 helper = std::abs(u.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 v = u.cross(helper).normalized();
  Vec3 w = u.cross(v);

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const long long max_attempts = 1000LL * n + 1000;
  long long attempts = 0;
  while (static_cast<int>(out.size()) < n && attempts < max_attempts) {
    ++attempts;
    const Vec3 ball(unit(rng), unit(rng), unit(rng));
    if (ball.squaredNorm() > 1.0) continue;
    const Vec3 p = center + semi_major * ball.x() * u + semi_minor * ball.y() * v +
                   semi_minor * ball.z() * w;
    if (accept && !accept(p)) continue;
    out.push_back(p);
  }
  return out;
}

Roadmap buildRoadmap(const Vec3& a, const Vec3& b, const EsdfGrid& esdf,
                     const TopoParams& params, Rng& rng) {
  const double d_c = params.d_c;
  const double step = params.step(esdf);
  if (!esdf.isPositionFree(a, d_c) || !esdf.isPositionFree(b, d_c))
    throw PlanningError(PlanningErrorCode::kUnreachableGoal, "goal position in collision");

  const double focal = (b - a).norm();
  double n_samples = params.initial_samples;
  double major_axis = std::max(params.initial_axis_ratio * focal, 1e-3);
  const auto free_fn = [&](const Vec3& p) { return esdf.isPositionFree(p, d_c); };

  for (int round = 0; round < params.max_rounds; ++round) {
    Roadmap rm;
    rm.addVertex(a);
    rm.addVertex(b);
    for (const Vec3& p : sampleInformed(a, b, major_axis, static_cast<int>(n_samples), rng,
                                        free_fn))
      rm.addVertex(p);

    const int n = static_cast<int>(rm.vertices.size());
    const int k = std::min(params.k_neighbors, n - 1);
    std::vector<std::pair<double, int>> cand;
    for (int i = 0; i < n; ++i) {
      cand.clear();
      for (int j = 0; j < n; ++j)
        if (j != i) cand.emplace_back((rm.vertices[i] - rm.vertices[j]).squaredNorm(), j);
      std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
      std::sort(cand.begin(), cand.begin() + k);
      for (int c = 0; c < k; ++c) {
        const int j = cand[c].second;
        if (rm.hasEdge(i, j)) continue;
        if (esdf.isSegmentFree(rm.vertices[i], rm.vertices[j], d_c, step)) rm.addEdge(i, j);
      }
    }
    if (rm.connected(0, 1)) return rm;
    n_samples *= params.sample_growth;
    major_axis *= params.axis_growth;
  }
  throw PlanningError(PlanningErrorCode::kUnreachableGoal,
                      "no roadmap path between goals after growth cap");
}

namespace {

struct SearchContext {
  const Roadmap& rm;
  const EsdfGrid& esdf;
  const TopoParams& params;
  double step;
};

using EdgeKey = std::pair<int, int>;

// Multi-source/multi-target Dijkstra (equivalent to a zero-length
// super-source/super-sink). Ties resolve to the smallest vertex index.
std::vector<int> shortestPath(const Roadmap& rm, const std::vector<char>& is_start,
                              const std::vector<char>& is_end,
                              const std::vector<char>& removed,
                              const std::set<EdgeKey>& blocked) {
  const int n = static_cast<int>(rm.vertices.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<char> done(n, 0);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  for (int v = 0; v < n; ++v)
    if (is_start[v] && !removed[v]) {
      dist[v] = 0.0;
      open.emplace(0.0, v);
    }
  while (!open.empty()) {
    const auto [d, v] = open.top();
    open.pop();
    if (done[v]) continue;
    done[v] = 1;
    if (is_end[v]) {
      std::vector<int> path;
      for (int x = v; x >= 0; x = parent[x]) path.push_back(x);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (const auto& e : rm.adjacency[v]) {
      if (removed[e.to] || done[e.to]) continue;
      if (blocked.count({std::min(v, e.to), std::max(v, e.to)})) continue;
      const double nd = d + e.length;
      if (nd < dist[e.to] || (nd == dist[e.to] && v < parent[e.to])) {
        dist[e.to] = nd;
        parent[e.to] = v;
        open.emplace(nd, e.to);
      }
    }
  }
  return {};
}

std::vector<std::vector<int>> distinctRecursive(const SearchContext& ctx,
                                                const std::vector<int>& starts,
                                                const std::vector<int>& ends,
                                                std::vector<char> removed, int depth) {
  const Roadmap& rm = ctx.rm;
  const int n = static_cast<int>(rm.vertices.size());
  std::vector<char> is_start(n, 0), is_end(n, 0);
  for (int s : starts) {
    is_start[s] = 1;
    removed[s] = 0;
  }
  for (int f : ends) {
    is_end[f] = 1;
    removed[f] = 0;
  }

  std::vector<std::vector<int>> found;
  std::vector<int> deleted;
  std::set<EdgeKey> blocked;
  const double d_c = ctx.params.d_c;

  while (static_cast<int>(found.size()) < ctx.params.max_paths_per_search) {
    std::vector<int> path = shortestPath(rm, is_start, is_end, removed, blocked);
    if (path.empty()) break;
    if (path.size() == 1) {
      // start and end coincide
      found.push_back(std::move(path));
      break;
    }
    int vn = -1;
    double dn = std::numeric_limits<double>::infinity();
    for (int v : path) {
      if (is_start[v] || is_end[v]) continue;
      const double c = ctx.esdf.distanceAt(rm.vertices[v]).value_or(0.0);
      if (c < dn) {
        dn = c;
        vn = v;
      }
    }
    found.push_back(path);
    if (vn < 0) {
      // direct start-end edge; block it so alternatives surface
      for (std::size_t i = 1; i < path.size(); ++i)
        blocked.insert({std::min(path[i - 1], path[i]), std::max(path[i - 1], path[i])});
      continue;
    }
    removed[vn] = 1;
    deleted.push_back(vn);
    const double radius = dn - d_c;
    if (radius > 0.0) {
      for (int v = 0; v < n; ++v) {
        if (removed[v] || is_start[v] || is_end[v]) continue;
        const double dist = (rm.vertices[v] - rm.vertices[vn]).norm();
        if (dist > radius) continue;
        if (!ctx.esdf.isSegmentFree(rm.vertices[vn], rm.vertices[v], d_c, ctx.step)) continue;
        removed[v] = 1;
        deleted.push_back(v);
      }
    }
  }

  if (!deleted.empty() && depth < ctx.params.max_recursion_depth) {
    std::sort(deleted.begin(), deleted.end());
    const auto before = distinctRecursive(ctx, starts, deleted, removed, depth + 1);
    const auto after = distinctRecursive(ctx, deleted, ends, removed, depth + 1);
    // connect at shared removed nodes
    std::size_t added = 0;
    const std::size_t cap = static_cast<std::size_t>(ctx.params.max_paths_per_search);
    for (const auto& pb : before) {
      for (const auto& pa : after) {
        if (pb.back() != pa.front()) continue;
        std::vector<int> joined = pb;
        joined.insert(joined.end(), pa.begin() + 1, pa.end());
        found.push_back(std::move(joined));
        if (++added >= cap) break;
      }
      if (added >= cap) break;
    }
  }
  return found;
}

}  // namespace

std::vector<TopoPath> findDistinctPaths(const Roadmap& roadmap,
                                        const std::vector<int>& starts,
                                        const std::vector<int>& ends,
                                        const EsdfGrid& esdf,
                                        const TopoParams& params) {
  if (starts.empty() || ends.empty())
    throw std::invalid_argument("start and end node sets must be nonempty");
  const int n = static_cast<int>(roadmap.vertices.size());
  for (int v : starts)
    if (v < 0 || v >= n) throw std::invalid_argument("start node out of range");
  for (int v : ends)
    if (v < 0 || v >= n) throw std::invalid_argument("end node out of range");

  const SearchContext ctx{roadmap, esdf, params, params.step(esdf)};
  const auto index_paths =
    distinctRecursive(ctx, starts, ends, std::vector<char>(n, 0), 0);
  std::vector<TopoPath> out;
  out.reserve(index_paths.size());
  for (const auto& ip : index_paths) {
    std::vector<Vec3> wps;
    wps.reserve(ip.size());
    for (int v : ip) wps.push_back(roadmap.vertices[v]);
    out.push_back(TopoPath::fromWaypoints(std::move(wps)));
  }
  return out;
}

namespace {

std::vector<Vec3> greedyShortcut(const std::vector<Vec3>& wps, const EsdfGrid& esdf,
                                 double d_c, double step) {
  std::vector<Vec3> out{wps.front()};
  std::size_t anchor = 0;
  while (anchor + 1 < wps.size()) {
    std::size_t next = anchor + 1;
    for (std::size_t j = wps.size() - 1; j > anchor + 1; --j) {
      if (esdf.isSegmentFree(wps[anchor], wps[j], d_c, step)) {
        next = j;
        break;
      }
    }
    out.push_back(wps[next]);
    anchor = next;
  }
  return out;
}

}  // namespace

TopoPath shortenPath(const TopoPath& path, const EsdfGrid& esdf, double d_c,
                     double step) {
  if (path.waypoints.size() <= 2) return path;
  std::vector<Vec3> fwd = greedyShortcut(path.waypoints, esdf, d_c, step);
  std::reverse(fwd.begin(), fwd.end());
  std::vector<Vec3> bwd = greedyShortcut(fwd, esdf, d_c, step);
  std::reverse(bwd.begin(), bwd.end());
  return TopoPath::fromWaypoints(std::move(bwd));
}

bool uvdEquivalent(const TopoPath& p1, const TopoPath& p2, int n_checks,
                   const EsdfGrid& esdf, double d_c, double step) {
  const int n = std::max(n_checks, 2);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    if (!esdf.isSegmentFree(p1.pointAt(s), p2.pointAt(s), d_c, step)) return false;
  }
  return true;
}

std::vector<TopoPath> filterPaths(
  std::vector<TopoPath> paths, const EsdfGrid& esdf, const TopoParams& params,
  const std::optional<GoalSequence::PassDirection>& arrival) {
  if (paths.empty()) return paths;
  std::stable_sort(paths.begin(), paths.end(),
                   [](const TopoPath& a, const TopoPath& b) { return a.length < b.length; });

  if (arrival) {
    std::vector<TopoPath> kept;
    for (auto& p : paths) {
      if (p.waypoints.size() < 2) {
        kept.push_back(std::move(p));
        continue;
      }
      const Vec3 last = (p.waypoints.back() - p.waypoints[p.waypoints.size() - 2]).normalized();
      const double c = std::clamp(last.dot(arrival->direction.normalized()), -1.0, 1.0);
      if (std::acos(c) <= arrival->max_angle) kept.push_back(std::move(p));
    }
    paths = std::move(kept);
    if (paths.empty()) return paths;
  }

  const double limit = params.length_factor * paths.front().length;
  const double step = params.step(esdf);
  std::vector<TopoPath> out;
  for (auto& p : paths) {
    if (static_cast<int>(out.size()) >= params.max_paths) break;
    if (p.length > limit) break;
    bool unique = true;
    for (const auto& q : out) {
      if (uvdEquivalent(p, q, params.uvd_checks, esdf, params.d_c, step)) {
        unique = false;
        break;
      }
    }
    if (unique) out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::vector<TopoPath>> topologicalPaths(const GoalSequence& goals,
                                                    const EsdfGrid& esdf,
                                                    const TopoParams& params,
                                                    std::uint64_t seed) {
  if (goals.size() < 2) throw std::invalid_argument("need at least two goals");
  for (const Vec3& g : goals.positions)
    if (!esdf.isPositionFree(g, params.d_c))
      throw PlanningError(PlanningErrorCode::kUnreachableGoal, "goal position in collision");

  const double step = params.step(esdf);
  std::vector<std::vector<TopoPath>> result;
  for (std::size_t i = 0; i + 1 < goals.size(); ++i) {
    Rng rng = segmentRng(seed, i);
    const Roadmap rm = buildRoadmap(goals.positions[i], goals.positions[i + 1], esdf, params, rng);
    std::vector<TopoPath> distinct = findDistinctPaths(rm, {0}, {1}, esdf, params);
    std::vector<TopoPath> shortened;
    shortened.reserve(distinct.size());
    for (const auto& p : distinct) shortened.push_back(shortenPath(p, esdf, params.d_c, step));
    std::optional<GoalSequence::PassDirection> arrival;
    if (params.use_direction_filter) arrival = goals.directionAt(i + 1);
    std::vector<TopoPath> filtered = filterPaths(shortened, esdf, params, arrival);
    if (filtered.empty() && arrival) {
      // no path meets the pass direction; keep the geometric candidates
      filtered = filterPaths(std::move(shortened), esdf, params);
    }
    if (filtered.empty())
      throw PlanningError(PlanningErrorCode::kUnreachableGoal, "no topological path found");
    result.push_back(std::move(filtered));
  }
  return result;
}

}  // namespace mtp
