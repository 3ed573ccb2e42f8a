#include "mtp/sst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "mtp/errors.hpp"

namespace mtp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kKeyOffset = 1 << 20;

double halfWidth(double variance) { return std::sqrt(3.0 * variance); }

}  // namespace

void SstParams::validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
  };
  positive(delta_s, "sst.delta_s");
  positive(delta_bn, "sst.delta_bn");
  positive(sigma2_p, "sst.sigma2_p");
  positive(sigma2_q, "sst.sigma2_q");
  positive(sigma2_v, "sst.sigma2_v");
  positive(sigma2_w, "sst.sigma2_w");
  positive(t_min, "sst.t_min");
  positive(r_pmm, "sst.r_pmm");
  positive(delta_ref, "sst.delta_ref");
  positive(dt_int, "sst.dt_int");
  if (sigma2_qrot < 0.0) throw std::invalid_argument("sst.sigma2_qrot must be >= 0");
  if (!(s_rmin > 0.0 && s_rmin <= s_rmax)) throw std::invalid_argument("need 0 < s_rmin <= s_rmax");
  if (!(t_min <= t_max)) throw std::invalid_argument("need t_min <= t_max");
  if (!(p_g >= 0.0 && p_g <= 1.0)) throw std::invalid_argument("sst.p_g must be in [0,1]");
  if (d_c < 0.0) throw std::invalid_argument("sst.d_c must be >= 0");
  if (max_iters < 0 || stall_iters < 1) throw std::invalid_argument("invalid stopping limits");
  if (log_stride < 0) throw std::invalid_argument("sst.log_stride must be >= 0");
}

double StateMetric::distance(const QuadState& a, const QuadState& b) const {
  const double ang = attitudeDistance(a.q, b.q);
  return std::sqrt((a.p - b.p).squaredNorm() * inv_p + ang * ang * inv_q +
                   (a.v - b.v).squaredNorm() * inv_v + (a.w - b.w).squaredNorm() * inv_w);
}

double StateMetric::squaredDistanceBounded(const QuadState& a, const QuadState& b,
                                           double bound2) const {
  const double partial = (a.p - b.p).squaredNorm() * inv_p + (a.v - b.v).squaredNorm() * inv_v +
                         (a.w - b.w).squaredNorm() * inv_w;
  if (partial > bound2) return partial;
  const double ang = attitudeDistance(a.q, b.q);
  return partial + ang * ang * inv_q;
}

// ---------------------------------------------------------------------------
// StateIndex

StateIndex::Key StateIndex::key(int ix, int iy, int iz) const {
  return (static_cast<Key>(ix + kKeyOffset) << 42) | (static_cast<Key>(iy + kKeyOffset) << 21) |
         static_cast<Key>(iz + kKeyOffset);
}

std::array<int, 3> StateIndex::cellOf(const Vec3& p) const {
  return {static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
          static_cast<int>(std::floor(p.z() / cell_))};
}

void StateIndex::insert(int id, const QuadState& x) {
  const auto c = cellOf(x.p);
  cells_[key(c[0], c[1], c[2])].push_back(id);
  if (count_ == 0) {
    lo_ = hi_ = c;
  } else {
    for (int i = 0; i < 3; ++i) {
      lo_[i] = std::min(lo_[i], c[i]);
      hi_[i] = std::max(hi_[i], c[i]);
    }
  }
  ++count_;
}

void StateIndex::remove(int id, const QuadState& x) {
  const auto c = cellOf(x.p);
  auto it = cells_.find(key(c[0], c[1], c[2]));
  if (it == cells_.end()) return;
  auto& v = it->second;
  auto pos = std::find(v.begin(), v.end(), id);
  if (pos == v.end()) return;
  v.erase(pos);  // keeps insertion order for deterministic queries
  --count_;
}

void StateIndex::positionQuery(const Vec3& p, double radius_p,
                               const std::function<void(int)>& visit) const {
  if (count_ == 0) return;
  const auto a = cellOf(p - Vec3::Constant(radius_p));
  const auto b = cellOf(p + Vec3::Constant(radius_p));
  for (int iz = std::max(a[2], lo_[2]); iz <= std::min(b[2], hi_[2]); ++iz)
    for (int iy = std::max(a[1], lo_[1]); iy <= std::min(b[1], hi_[1]); ++iy)
      for (int ix = std::max(a[0], lo_[0]); ix <= std::min(b[0], hi_[0]); ++ix) {
        auto it = cells_.find(key(ix, iy, iz));
        if (it == cells_.end()) continue;
        for (int id : it->second) visit(id);
      }
}

std::vector<int> StateIndex::within(const QuadState& x, double r,
                                    const std::function<const QuadState&(int)>& state) const {
  std::vector<int> out;
  positionQuery(x.p, metric_.positionRadius(r), [&](int id) {
    if (metric_.squaredDistanceBounded(state(id), x, r * r) <= r * r) out.push_back(id);
  });
  return out;
}

int StateIndex::nearest(const QuadState& x,
                        const std::function<const QuadState&(int)>& state) const {
  if (count_ == 0) return -1;
  const auto c = cellOf(x.p);
  int best = -1;
  double best_d2 = kInf;
  std::size_t seen = 0;
  auto visitCell = [&](int ix, int iy, int iz) {
    if (ix < lo_[0] || ix > hi_[0] || iy < lo_[1] || iy > hi_[1] || iz < lo_[2] || iz > hi_[2])
      return;
    auto it = cells_.find(key(ix, iy, iz));
    if (it == cells_.end()) return;
    for (int id : it->second) {
      ++seen;
      const double d2 = metric_.squaredDistanceBounded(state(id), x, best_d2);
      if (d2 < best_d2 || (d2 == best_d2 && id < best)) {
        best_d2 = d2;
        best = id;
      }
    }
  };
  const double scale = std::sqrt(metric_.inv_p) * cell_;
  for (int k = 0;; ++k) {
    for (int dz = -k; dz <= k; ++dz)
      for (int dy = -k; dy <= k; ++dy)
        for (int dx = -k; dx <= k; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != k) continue;
          visitCell(c[0] + dx, c[1] + dy, c[2] + dz);
        }
    if (seen == count_) break;
    if (best >= 0 && best_d2 <= k * k * scale * scale) break;
    bool covers = true;
    for (int i = 0; i < 3; ++i) covers = covers && c[i] - k <= lo_[i] && c[i] + k >= hi_[i];
    if (covers) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// GuidedSst

GuidedSst::GuidedSst(const GuideReference& guide, const GoalSequence& goals,
                     std::vector<double> goal_times, const EsdfGrid& esdf,
                     const SstParams& params, std::uint64_t seed)
    : guide_(guide),
      goals_(goals),
      goal_times_(std::move(goal_times)),
      esdf_(esdf),
      params_(params),
      quad_(guide.params()),
      metric_(StateMetric::fromParams(params)),
      rng_(seed) {
  params_.validate();
  if (goals_.size() < 2) throw std::invalid_argument("need at least two goals");
  if (goal_times_.size() != goals_.size())
    throw std::invalid_argument("one guide time per goal");
  const double cell = metric_.positionRadius(params_.delta_s);
  for (std::size_t i = 0; i < goals_.size(); ++i) {
    active_.emplace_back(cell, metric_);
    witness_index_.emplace_back(cell, metric_);
  }
  witnesses_.resize(goals_.size());
  active_count_.assign(goals_.size(), 0);

  TreeNode root;
  root.x = QuadState::hover(goals_.positions.front());
  while (root.goal < doneLevel() && reachedGoal(root.x.p, root.goal) >= 0) ++root.goal;
  root.guide_t = nearestGuideTime(root.x, root.goal);
  nodes_.push_back(root);
  live_ = 1;
  activate(0);
  witnesses_[root.goal].push_back(Witness{root.x, 0});
  witness_index_[root.goal].insert(0, root.x);
  stats_.best_goal = root.goal;
  if (root.goal == doneLevel()) best_final_ = 0;
}

std::pair<double, double> GuidedSst::window(int level) const {
  const int l = std::min(level, doneLevel() - 1);
  return {goal_times_[l], goal_times_[l + 1]};
}

int GuidedSst::reachedGoal(const Vec3& p, int level) const {
  if (level >= doneLevel()) return -1;
  return (p - goals_.positions[level + 1]).norm() <= goals_.r_tol ? level + 1 : -1;
}

double GuidedSst::nearestGuideTime(const QuadState& x, int level) const {
  const auto [a, b] = window(level);
  const auto& s = guide_.samples();
  auto it = std::lower_bound(s.begin(), s.end(), a - 1e-12,
                             [](const GuideSample& g, double t) { return g.t < t; });
  double best_t = a, best_d = kInf;
  for (; it != s.end() && it->t <= b + 1e-12; ++it) {
    const double d = metric_.distance(it->x, x);
    if (d < best_d) {  // ties keep the earlier time
      best_d = d;
      best_t = it->t;
    }
  }
  return best_t;
}

std::pair<double, double> GuidedSst::nearestGuidePosition(const Vec3& p, int level) const {
  const auto [a, b] = window(level);
  const auto& s = guide_.samples();
  auto it = std::lower_bound(s.begin(), s.end(), a - 1e-12,
                             [](const GuideSample& g, double t) { return g.t < t; });
  double best_t = a, best_d = kInf;
  for (; it != s.end() && it->t <= b + 1e-12; ++it) {
    const double d = (it->x.p - p).norm();
    if (d < best_d - 1e-12 || (d <= best_d + 1e-12 && it->t > best_t)) {
      // positions repeat while rotating in place; take the latest time
      best_d = std::min(d, best_d);
      best_t = it->t;
    }
  }
  return {best_d, best_t};
}

int GuidedSst::randomGoalIndex() {
  std::vector<int> reached;
  for (int l = 0; l < doneLevel(); ++l)
    if (active_count_[l] > 0) reached.push_back(l);
  if (reached.empty()) throw std::logic_error("no expandable tree level");
  std::uniform_int_distribution<std::size_t> pick(0, reached.size() - 1);
  return reached[pick(rng_)];
}

QuadState GuidedSst::sampleGuideState(int level) {
  const auto [a, b] = window(level);
  std::uniform_real_distribution<double> ut(a, b);
  QuadState x = guide_.stateAt(ut(rng_));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double hp = halfWidth(params_.sigma2_p), hv = halfWidth(params_.sigma2_v),
               hw = halfWidth(params_.sigma2_w), hq = halfWidth(params_.sigma2_q);
  for (int i = 0; i < 3; ++i) x.p[i] += hp * u(rng_);
  for (int i = 0; i < 3; ++i) x.v[i] += hv * u(rng_);
  for (int i = 0; i < 3; ++i) x.w[i] += hw * u(rng_);
  const double z = u(rng_);
  const double phi = M_PI * u(rng_);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Vec3 axis(r * std::cos(phi), r * std::sin(phi), z);
  x.q = (Quat(Eigen::AngleAxisd(hq * u(rng_), axis)) * x.q).normalized();
  return x;
}

int GuidedSst::bestNear(int level, const QuadState& q, const std::vector<int>& pool) const {
  const auto stateOf = [this](int id) -> const QuadState& { return nodes_[id].x; };
  auto minCost = [&](const std::vector<int>& ids) {
    int best = -1;
    for (int id : ids)
      if (best < 0 || nodes_[id].cost < nodes_[best].cost ||
          (nodes_[id].cost == nodes_[best].cost && id < best))
        best = id;
    return best;
  };
  if (!pool.empty()) {
    std::vector<int> near;
    int nearest = -1;
    double nearest_d = kInf;
    for (int id : pool) {
      const double d = metric_.distance(nodes_[id].x, q);
      if (d <= params_.delta_bn) near.push_back(id);
      if (d < nearest_d) {
        nearest_d = d;
        nearest = id;
      }
    }
    return near.empty() ? nearest : minCost(near);
  }
  const auto near = active_[level].within(q, params_.delta_bn, stateOf);
  if (!near.empty()) return minCost(near);
  return active_[level].nearest(q, stateOf);
}

int GuidedSst::bestNearSelection(int level) {
  const QuadState q = sampleGuideState(level);
  std::vector<int> pool;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng_) < params_.p_g) {
    const Vec3& g = goals_.positions[level];
    active_[level].positionQuery(g, goals_.r_tol, [&](int id) {
      if ((nodes_[id].x.p - g).norm() <= goals_.r_tol) pool.push_back(id);
    });
  }
  return bestNear(level, q, pool);
}

std::vector<MotorCommand> GuidedSst::edgeCommands(EdgeSpec& edge, int substeps, Rng* rng) const {
  const auto& phases = guide_.phases();
  const double dt = params_.dt_int;
  std::uniform_real_distribution<double> us(params_.s_rmin, params_.s_rmax);
  std::uniform_real_distribution<double> ua(-1.0, 1.0);
  const double h_axis = halfWidth(params_.sigma2_qrot);
  std::size_t n_scale = 0, n_angle = 0;
  auto nextScale = [&]() {
    if (n_scale == edge.scales.size()) {
      if (!rng) throw std::logic_error("edge spec lacks a time scale");
      edge.scales.push_back(us(*rng));
    }
    return edge.scales[n_scale++];
  };
  auto nextAngle = [&]() {
    if (n_angle == edge.axis_angles.size()) {
      if (!rng) throw std::logic_error("edge spec lacks an axis perturbation");
      edge.axis_angles.push_back(h_axis * ua(*rng));
    }
    return edge.axis_angles[n_angle++];
  };

  std::vector<MotorCommand> out;
  out.reserve(substeps);
  const MotorCommand hover = quad_.hoverCommand();
  bool beyond = phases.empty() || edge.guide_t0 >= guide_.duration();
  std::size_t k = beyond ? 0 : guide_.phaseAt(edge.guide_t0);
  // Every phase, once scaled, lasts a whole number of sub-steps so the
  // hold never straddles a switch (keeps rest-to-rest rotations at rest).
  long piece_end = 0;  // sub-step index at which the current phase ends
  MotorCommand cmd = hover;
  std::size_t rot_segment = std::numeric_limits<std::size_t>::max();
  std::array<MotorCommand, 3> rot_cmd{};
  auto enter = [&](std::size_t idx, double remaining) {
    const GuidePhase& ph = phases[idx];
    piece_end += std::lround(remaining * nextScale() / dt);
    if (ph.kind == GuidePhaseKind::kTranslation) {
      cmd = ph.command;
    } else {
      if (ph.segment != rot_segment) {
        rot_segment = ph.segment;
        const GuideSegment& seg = guide_.segments()[ph.segment];
        const Vec3 perturbed = Eigen::AngleAxisd(nextAngle(), Vec3::UnitZ()) * seg.profile.axis;
        rot_cmd = GuideReference::rotationCommands(perturbed, seg.coast_thrust, seg.torque_scale,
                                                   quad_);
      }
      cmd = rot_cmd[ph.kind == GuidePhaseKind::kRotationAccel   ? 0
                    : ph.kind == GuidePhaseKind::kRotationCoast ? 1
                                                                : 2];
    }
  };
  if (!beyond) enter(k, phases[k].t_start + phases[k].duration - edge.guide_t0);
  for (int j = 0; j < substeps; ++j) {
    while (!beyond && j >= piece_end) {
      if (++k >= phases.size()) {
        beyond = true;
        cmd = hover;
        break;
      }
      enter(k, phases[k].duration);
    }
    out.push_back(cmd.cwiseMax(quad_.f_min).cwiseMin(quad_.f_max));
  }
  return out;
}

std::vector<MotorCommand> GuidedSst::edgeCommands(const EdgeSpec& edge) const {
  EdgeSpec copy = edge;
  return edgeCommands(copy, edge.steps, nullptr);
}

std::optional<Candidate> GuidedSst::propagate(int node) {
  const TreeNode& from = nodes_[node];
  std::uniform_real_distribution<double> ud(params_.t_min, params_.t_max);
  const double duration = ud(rng_);
  const int steps = std::max(1, static_cast<int>(std::ceil(duration / params_.dt_int - 1e-9)));
  Candidate c;
  c.edge.guide_t0 = from.guide_t;
  const auto cmds = edgeCommands(c.edge, steps, &rng_);
  c.x = from.x;
  c.goal = from.goal;
  int done = 0;
  for (int j = 0; j < steps; ++j) {
    const QuadState next = rk4Step(c.x, cmds[j], params_.dt_int, quad_);
    if (!checkLimits(cmds[j], next.w, quad_)) break;
    c.x = next;
    done = j + 1;
    if (!esdf_.isPositionFree(c.x.p, params_.d_c)) {
      c.collision_free = false;
      break;
    }
    if (reachedGoal(c.x.p, c.goal) >= 0) {
      ++c.goal;
      break;
    }
  }
  if (done == 0) return std::nullopt;
  c.edge.steps = done;
  c.cost = from.cost + done * params_.dt_int;
  return c;
}

bool GuidedSst::isPassing(const Candidate& c) const {
  if (!c.collision_free) return false;
  const auto [dist, t_ref] = nearestGuidePosition(c.x.p, c.goal);
  return dist <= params_.delta_ref && c.cost <= params_.r_pmm * t_ref;
}

std::pair<int, bool> GuidedSst::isLocalBest(const QuadState& x, double cost, int level) {
  auto& ws = witnesses_[level];
  const auto near = witness_index_[level].within(
    x, params_.delta_s, [&ws](int id) -> const QuadState& { return ws[id].center; });
  int best = -1;
  double best_d = kInf;
  for (int id : near) {
    const double d = metric_.distance(ws[id].center, x);
    if (d < best_d || (d == best_d && id < best)) {
      best_d = d;
      best = id;
    }
  }
  if (best < 0) {
    ws.push_back(Witness{x, -1});
    const int id = static_cast<int>(ws.size()) - 1;
    witness_index_[level].insert(id, x);
    return {id, true};
  }
  const int rep = ws[best].rep;
  return {best, rep < 0 || cost < nodes_[rep].cost};
}

void GuidedSst::activate(int id) {
  TreeNode& n = nodes_[id];
  n.active = true;
  if (n.goal < doneLevel()) {
    active_[n.goal].insert(id, n.x);
    ++active_count_[n.goal];
  }
}

void GuidedSst::deactivate(int id) {
  TreeNode& n = nodes_[id];
  if (!n.active) return;
  n.active = false;
  if (n.goal < doneLevel()) {
    active_[n.goal].remove(id, n.x);
    --active_count_[n.goal];
  }
}

void GuidedSst::removeCascade(int id) {
  while (id > 0 && !nodes_[id].active && nodes_[id].children == 0 && !nodes_[id].removed) {
    TreeNode& n = nodes_[id];
    n.removed = true;
    n.edge.scales = {};
    n.edge.axis_angles = {};
    --live_;
    ++stats_.pruned;
    const int parent = n.parent;
    if (parent >= 0) --nodes_[parent].children;
    id = parent;
  }
}

void GuidedSst::pruneNodes(int node, int level, int witness) {
  Witness& w = witnesses_[level][witness];
  const int old = w.rep;
  w.rep = node;
  if (old < 0 || old == node) return;
  deactivate(old);
  removeCascade(old);
}

int GuidedSst::addNode(int parent, const Candidate& c) {
  TreeNode n;
  n.x = c.x;
  n.cost = c.cost;
  n.parent = parent;
  n.edge = c.edge;
  n.goal = c.goal;
  n.guide_t = nearestGuideTime(c.x, c.goal);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  ++nodes_[parent].children;
  ++live_;
  activate(id);
  return id;
}

double GuidedSst::bestCost() const { return best_final_ >= 0 ? nodes_[best_final_].cost : kInf; }

bool GuidedSst::iterate() {
  ++stats_.iterations;
  bool accepted = false;
  const int level = randomGoalIndex();
  const int sel = bestNearSelection(level);
  if (auto cand = propagate(sel)) {
    if (!isPassing(*cand)) {
      ++stats_.rejected_passing;
    } else {
      const auto [w, ok] = isLocalBest(cand->x, cand->cost, cand->goal);
      if (!ok) {
        ++stats_.rejected_local;
      } else {
        const int id = addNode(sel, *cand);
        pruneNodes(id, cand->goal, w);
        ++stats_.accepted;
        accepted = true;
        if (cand->goal > stats_.best_goal) {
          stats_.best_goal = cand->goal;
          last_improvement_ = stats_.iterations;
        }
        if (cand->goal == doneLevel() && cand->cost < bestCost()) {
          best_final_ = id;
          last_improvement_ = stats_.iterations;
        }
      }
    }
  } else {
    ++stats_.rejected_limits;
  }
  if (params_.log_stride > 0 && (accepted || stats_.iterations % params_.log_stride == 0)) {
    std::size_t n_w = 0;
    for (const auto& ws : witnesses_) n_w += ws.size();
    log_.push_back(SstLogEntry{stats_.iterations, level, accepted, live_, n_w, bestCost()});
  }
  return accepted;
}

bool GuidedSst::shouldStop() const {
  // a zero-duration solution (start inside the last goal) cannot improve
  if (bestCost() <= 0.0) return true;
  const bool expandable = std::any_of(active_count_.begin(), active_count_.begin() + doneLevel(),
                                      [](int n) { return n > 0; });
  return !expandable || stats_.iterations >= params_.max_iters ||
         stats_.iterations - last_improvement_ >= params_.stall_iters;
}

SstResult GuidedSst::run() {
  while (!shouldStop()) iterate();
  SstResult out;
  stats_.solved = best_final_ >= 0;
  stats_.best_T = bestCost();
  out.stats = stats_;
  if (stats_.solved)
    out.trajectory = extract(best_final_);
  else
    out.partial = extract(bestProgressNode());
  out.log = log_;
  return out;
}

int GuidedSst::bestProgressNode() const {
  int best = 0;
  for (int id = 0; id < static_cast<int>(nodes_.size()); ++id) {
    const TreeNode& n = nodes_[id];
    if (n.removed) continue;
    const TreeNode& b = nodes_[best];
    if (n.goal > b.goal || (n.goal == b.goal && n.cost < b.cost)) best = id;
  }
  return best;
}

QuadState GuidedSst::repropagate(int node, int refine) const {
  const TreeNode& n = nodes_[node];
  if (n.parent < 0) return n.x;
  QuadState x = nodes_[n.parent].x;
  const double h = params_.dt_int / refine;
  for (const auto& f : edgeCommands(n.edge))
    for (int r = 0; r < refine; ++r) x = rk4Step(x, f, h, quad_);
  return x;
}

QuadTrajectory GuidedSst::extract(int node) const {
  std::vector<int> chain;
  for (int id = node; id >= 0; id = nodes_[id].parent) chain.push_back(id);
  std::reverse(chain.begin(), chain.end());
  QuadTrajectory traj;
  QuadState x = nodes_[chain.front()].x;
  double t = 0.0;
  MotorCommand last = quad_.hoverCommand();
  long step = 0;
  for (std::size_t c = 1; c < chain.size(); ++c) {
    const auto cmds = edgeCommands(nodes_[chain[c]].edge);
    for (std::size_t j = 0; j < cmds.size(); ++j) {
      traj.samples.push_back(TrajectorySample{t, x, cmds[j], j == 0});
      x = rk4Step(x, cmds[j], params_.dt_int, quad_);
      ++step;
      t = step * params_.dt_int;
      last = cmds[j];
    }
  }
  traj.samples.push_back(TrajectorySample{t, x, last, true});
  traj.T = t;
  return traj;
}

std::vector<double> goalGuideTimes(const GuideReference& guide, const PmmTrajectory& pm,
                                   const std::vector<std::size_t>& goal_index) {
  if (goal_index.size() < 2) throw std::invalid_argument("need at least two goals");
  const auto knots = pm.knotTimes();
  std::vector<double> out;
  for (std::size_t j = 0; j < goal_index.size(); ++j) {
    if (j == 0) out.push_back(0.0);
    else if (j + 1 == goal_index.size()) out.push_back(guide.duration());
    else out.push_back(guide.fromPmTime(knots.at(goal_index[j])));
  }
  return out;
}

}  // namespace mtp
