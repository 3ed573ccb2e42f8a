#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mtp/sst.hpp"
#include "mtp/trajectory_io.hpp"
#include "mtp/velocity_search.hpp"

using namespace mtp;

namespace {

const QuadParams kParams;

/// Rest-to-rest hop in an empty 8 x 4 x 3 m box.
struct Hop {
  EsdfGrid esdf = fixture::openBox(8.0, 4.0, 3.0, 0.1);
  GoalSequence goals;
  PmmTrajectory pm;
  GuideReference guide;
  std::vector<double> goal_times;

  Hop(const Vec3& a, const Vec3& b)
      : goals(makeGoals(a, b)), pm(solve(a, b)), guide(pm, kParams),
        goal_times(goalGuideTimes(guide, pm, {0, 1})) {}

  GuidedSst sst(const SstParams& p = {}, std::uint64_t seed = 7) const {
    return GuidedSst(guide, goals, goal_times, esdf, p, seed);
  }

  static GoalSequence makeGoals(const Vec3& a, const Vec3& b) {
    GoalSequence g;
    g.positions = {a, b};
    return g;
  }
  static PmmTrajectory solve(const Vec3& a, const Vec3& b) {
    VelocitySearchParams vp;
    vp.a_max = kParams.maxThrustAccel();
    vp.gravity = kParams.gravity;
    return velocitySearch({a, b}, vp).trajectory;
  }
};

const Vec3 kStart(1.0, 2.0, 1.5);
const Vec3 kEnd(3.0, 2.0, 1.5);

Candidate candidateAt(const Vec3& p, double cost, int goal = 0) {
  Candidate c;
  c.x = QuadState::hover(p);
  c.cost = cost;
  c.goal = goal;
  return c;
}

/// Shortest time for a point mass starting at rest with the thrust limit to
/// cover `distance` horizontally while holding altitude, ignoring braking.
double horizontalReachBound(double distance) {
  const double a = std::sqrt(std::pow(kParams.maxThrustAccel(), 2) - kParams.gravity.squaredNorm());
  return std::sqrt(2.0 * distance / a);
}

}  // namespace

TEST_CASE("best near selection") {
  const Hop hop(kStart, kEnd);
  auto sst = hop.sst();
  const QuadState far = QuadState::hover(kStart + Vec3(0, 0, 0.9));
  SUBCASE("single node tree") { CHECK(sst.bestNear(0, far, {}) == 0); }
  SUBCASE("min cost inside the radius, else nearest") {
    // 1.5 m away from the root: outside delta_bn in the position term alone
    const Vec3 p = kStart + Vec3(1.5, 0.0, 0.0);
    const int a = sst.addNode(0, candidateAt(p, 2.0));
    const int b = sst.addNode(0, candidateAt(p + Vec3(0.1, 0, 0), 1.0));
    CHECK(sst.metric().distance(sst.nodes()[0].x, QuadState::hover(p)) > SstParams{}.delta_bn);
    CHECK(sst.bestNear(0, QuadState::hover(p), {}) == b);
    // 6 m/s apart from every node: nothing within delta_bn, the nearest wins
    QuadState q = QuadState::hover(p - Vec3(0.05, 0.0, 0.0));
    q.v = Vec3(6.0, 0.0, 0.0);
    for (int id : {0, a, b}) CHECK(sst.metric().distance(sst.nodes()[id].x, q) > SstParams{}.delta_bn);
    CHECK(sst.bestNear(0, q, {}) == a);
  }
  SUBCASE("pool restricts the candidates") {
    const int a = sst.addNode(0, candidateAt(kStart + Vec3(0.05, 0, 0), 0.5));
    CHECK(sst.bestNear(0, sst.nodes()[0].x, {a}) == a);
    CHECK(sst.bestNear(0, sst.nodes()[0].x, {}) == 0);
  }
}

TEST_CASE("local best and witnesses") {
  const Hop hop(kStart, kEnd);
  auto sst = hop.sst();
  const SstParams p;
  const Vec3 c = kStart + Vec3(1.5, 0.0, 0.0);
  SUBCASE("new region creates a witness") {
    const std::size_t before = sst.witnesses()[0].size();
    const auto [w, ok] = sst.isLocalBest(QuadState::hover(c), 1.0, 0);
    CHECK(ok);
    CHECK(sst.witnesses()[0].size() == before + 1);
    CHECK(sst.witnesses()[0][w].rep == -1);
  }
  SUBCASE("existing witness compares representative costs") {
    const int n = sst.addNode(0, candidateAt(c, 2.0));
    const auto [w, ok] = sst.isLocalBest(QuadState::hover(c), 2.0, 0);
    REQUIRE(ok);
    sst.pruneNodes(n, 0, w);
    // 0.1 away in the metric
    const QuadState q = QuadState::hover(c + Vec3(0.1 * std::sqrt(p.sigma2_p), 0, 0));
    CHECK(sst.metric().distance(q, QuadState::hover(c)) == doctest::Approx(0.1));
    const auto better = sst.isLocalBest(q, 1.5, 0);
    CHECK(better.first == w);
    CHECK(better.second);
    const auto worse = sst.isLocalBest(q, 2.5, 0);
    CHECK(worse.first == w);
    CHECK_FALSE(worse.second);
    CHECK(sst.witnesses()[0].size() == 2);
  }
}

TEST_CASE("pruning") {
  const Hop hop(kStart, kEnd);
  auto sst = hop.sst();
  const Vec3 c1 = kStart + Vec3(1.0, 0.0, 0.0);
  const Vec3 c2 = kStart + Vec3(2.0, 0.0, 0.9);
  auto witnessFor = [&](int node) {
    const auto [w, ok] = sst.isLocalBest(sst.nodes()[node].x, sst.nodes()[node].cost, 0);
    REQUIRE(ok);
    sst.pruneNodes(node, 0, w);
    return w;
  };
  const int parent = sst.addNode(0, candidateAt(c1, 1.0));
  const int w1 = witnessFor(parent);
  const int child = sst.addNode(parent, candidateAt(c2, 2.0));
  const int w2 = witnessFor(child);
  const std::size_t live = sst.liveNodes();

  SUBCASE("representative with children is kept inactive") {
    const int better = sst.addNode(0, candidateAt(c1, 0.5));
    sst.pruneNodes(better, 0, w1);
    CHECK_FALSE(sst.nodes()[parent].active);
    CHECK_FALSE(sst.nodes()[parent].removed);
    CHECK(sst.witnesses()[0][w1].rep == better);
    CHECK(sst.liveNodes() == live + 1);
  }
  SUBCASE("inactive leaves are removed up the chain") {
    sst.pruneNodes(sst.addNode(0, candidateAt(c1, 0.5)), 0, w1);
    const int better = sst.addNode(0, candidateAt(c2, 1.5));
    sst.pruneNodes(better, 0, w2);
    CHECK(sst.nodes()[child].removed);
    CHECK(sst.nodes()[parent].removed);
    CHECK(sst.nodes()[0].children == 2);
    CHECK(sst.liveNodes() == live + 2 - 2);
  }
  SUBCASE("replacing a representative by itself does nothing") {
    sst.pruneNodes(child, 0, w2);
    CHECK(sst.nodes()[child].active);
    CHECK(sst.witnesses()[0][w2].rep == child);
    CHECK(sst.liveNodes() == live);
  }
}

TEST_CASE("propagation") {
  const Hop hop(kStart, kEnd);
  auto sst = hop.sst();
  const SstParams p;

  SUBCASE("beyond the guide the input is hover") {
    EdgeSpec edge;
    edge.guide_t0 = hop.guide.duration();
    edge.steps = 500;
    QuadState x = QuadState::hover(kStart);
    for (const auto& f : sst.edgeCommands(edge)) x = rk4Step(x, f, p.dt_int, kParams);
    CHECK((x.p - kStart).norm() < 1e-12);
    CHECK(x.v.norm() < 1e-12);
    CHECK(x.w.norm() < 1e-12);
  }

  SUBCASE("unit scales reproduce the nominal inputs") {
    const auto& seg = hop.guide.segments().front();
    REQUIRE(seg.rotation);
    EdgeSpec edge;
    edge.guide_t0 = 0.0;
    edge.steps = static_cast<int>(std::lround(seg.duration / p.dt_int));
    edge.scales.assign(8, 1.0);
    edge.axis_angles.assign(4, 0.0);
    const auto cmds = sst.edgeCommands(edge);
    QuadState x = QuadState::hover(kStart), ref = x;
    for (int j = 0; j < edge.steps; ++j) {
      const MotorCommand nominal = hop.guide.commandAt((j + 0.5) * p.dt_int);
      CHECK((cmds[j] - nominal).norm() < 1e-12);
      x = rk4Step(x, cmds[j], p.dt_int, kParams);
      ref = rk4Step(ref, nominal, p.dt_int, kParams);
    }
    CHECK((x.p - ref.p).norm() < 1e-6);
    CHECK(attitudeDistance(x.q, ref.q) < 1e-6);
    // rest to rest, and the body axis ends on the first thrust direction
    CHECK(x.w.norm() < 1e-6);
    const Vec3 thrust_dir = hop.guide.segments()[1].thrust.normalized();
    CHECK(((x.q * Vec3::UnitZ()) - thrust_dir).norm() < 1e-6);
  }

  SUBCASE("durations stay in range") {
    for (int i = 0; i < 3000; ++i) {
      const auto c = sst.propagate(0);
      if (!c) continue;
      const double dur = c->edge.steps * p.dt_int;
      CHECK(dur <= p.t_max + p.dt_int);
      CHECK(dur > 0.0);
      // early stops only shorten an edge
      CHECK(c->edge.steps <= static_cast<int>(std::ceil(p.t_max / p.dt_int)));
      CHECK(c->cost == doctest::Approx(dur));
    }
  }
}

TEST_CASE("passing test") {
  const Hop hop(kStart, kEnd);
  const auto sst = hop.sst();
  const SstParams p;
  // inside the first translation, where guide positions are unique
  const auto& tr = hop.guide.segments()[1];
  REQUIRE_FALSE(tr.rotation);
  const double t = tr.t_start + 0.5 * tr.duration;
  Candidate c;
  c.x = hop.guide.stateAt(t);
  c.cost = t;
  c.goal = 0;
  CHECK(sst.isPassing(c));

  Candidate off = c;
  off.x.p += Vec3(0.0, 0.0, 2.5);
  CHECK_FALSE(sst.isPassing(off));

  Candidate slow = c;
  slow.cost = 1.10 * t;
  CHECK_FALSE(sst.isPassing(slow));

  Candidate hit = c;
  hit.collision_free = false;
  CHECK_FALSE(sst.isPassing(hit));
  CHECK(p.delta_ref == 2.0);
  CHECK(p.r_pmm == 1.05);
}

TEST_CASE("start inside the goal gives a zero-duration trajectory") {
  const Hop hop(kStart, kStart + Vec3(0.1, 0.0, 0.0));
  auto sst = hop.sst();
  const SstResult res = sst.run();
  CHECK(res.stats.solved);
  CHECK(res.stats.iterations == 0);
  CHECK(res.trajectory.T == 0.0);
  REQUIRE(res.trajectory.samples.size() == 1);
  CHECK((res.trajectory.samples[0].x.p - kStart).norm() == 0.0);
}

TEST_CASE("two metre hop") {
  const Hop hop(kStart, kEnd);
  SstParams p;
  p.max_iters = 200000;
  p.stall_iters = 20000;
  auto sst = hop.sst(p, 3);
  const SstResult res = sst.run();
  REQUIRE(res.stats.solved);
  const double T = res.trajectory.T;
  CHECK(T <= p.r_pmm * hop.pm.T + p.t_max);
  // only the goal ball has to be reached, at any speed
  CHECK(T >= horizontalReachBound((kEnd - kStart).norm() - hop.goals.r_tol));
  const auto rows = resampleTrajectory(res.trajectory, 0.01, kParams);
  const VerifyReport rep = verifyTrajectory(rows, hop.esdf, hop.goals, kParams);
  for (const auto& v : rep.violations) MESSAGE(v);
  CHECK(rep.ok);
  // goal annotations are non-decreasing along the solution
  int last = 0;
  for (int id = sst.bestFinal(); id >= 0; id = sst.nodes()[id].parent) {
    if (sst.nodes()[id].parent >= 0) CHECK(sst.nodes()[sst.nodes()[id].parent].goal <= sst.nodes()[id].goal);
    last = sst.nodes()[id].goal;
  }
  CHECK(last == 0);
}

TEST_CASE("seeded runs repeat exactly") {
  const Hop hop(kStart, kEnd);
  SstParams p;
  p.max_iters = 4000;
  auto a = hop.sst(p, 11), b = hop.sst(p, 11);
  const auto ra = a.run(), rb = b.run();
  CHECK(a.nodes().size() == b.nodes().size());
  CHECK(ra.stats.best_T == rb.stats.best_T);
  CHECK(ra.stats.accepted == rb.stats.accepted);
  for (std::size_t i = 0; i < a.nodes().size(); ++i) {
    CHECK(a.nodes()[i].x.p == b.nodes()[i].x.p);
    CHECK(a.nodes()[i].cost == b.nodes()[i].cost);
  }
}

TEST_CASE("tree invariants hold while searching") {
  const Hop hop(kStart, kEnd);
  SstParams p;
  p.max_iters = 3000;
  p.stall_iters = p.max_iters;
  auto sst = hop.sst(p, 5);
  double best = std::numeric_limits<double>::infinity();
  while (!sst.shouldStop()) {
    sst.iterate();
    CHECK(sst.bestCost() <= best);
    best = sst.bestCost();
  }
  for (int level = 0; level < sst.levels(); ++level) {
    const auto& ws = sst.witnesses()[level];
    for (std::size_t i = 0; i < ws.size(); ++i)
      for (std::size_t j = i + 1; j < ws.size(); ++j)
        CHECK(sst.metric().distance(ws[i].center, ws[j].center) >= p.delta_s);
  }
  for (int id = 1; id < static_cast<int>(sst.nodes().size()); ++id) {
    const auto& n = sst.nodes()[id];
    if (n.removed) continue;
    CHECK((sst.repropagate(id, 10).p - n.x.p).norm() < 1e-4);
    CHECK(n.cost == doctest::Approx(sst.nodes()[n.parent].cost + n.edge.steps * p.dt_int));
    CHECK_FALSE(sst.nodes()[n.parent].removed);
  }
}
