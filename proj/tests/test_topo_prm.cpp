#include <doctest.h>

#include <cmath>

#include "mtp/topo_prm.hpp"
#include "fixtures.hpp"

using namespace mtp;

using fixture::cubeBox;
using fixture::openBox;
using fixture::pathFree;

TEST_CASE("informed samples lie inside the spheroid") {
  Rng rng(1);
  const Vec3 a(0, 0, 0), b(4, 2, 1);
  const double major = 1.2 * (b - a).norm();
  const auto pts = sampleInformed(a, b, major, 2000, rng);
  REQUIRE(pts.size() == 2000);
  for (const auto& p : pts) CHECK((p - a).norm() + (p - b).norm() <= major + 1e-9);
}

TEST_CASE("roadmap in free space connects directly") {
  const auto esdf = openBox(4, 4, 2, 0.1);
  Rng rng(2);
  TopoParams params;
  const auto rm = buildRoadmap(Vec3(0.5, 0.5, 1), Vec3(3.5, 3.5, 1), esdf, params, rng);
  CHECK(rm.connected(0, 1));
  for (std::size_t v = 0; v < rm.vertices.size(); ++v)
    CHECK(esdf.isPositionFree(rm.vertices[v], params.d_c));
}

TEST_CASE("shortening is idempotent and free") {
  const auto esdf = cubeBox();
  TopoPath zig = TopoPath::fromWaypoints(
    {Vec3(1, 4, 1.5), Vec3(2, 5.5, 1.5), Vec3(3, 5.2, 1.5), Vec3(5, 5.4, 1.5), Vec3(7, 4, 1.5)});
  REQUIRE(pathFree(zig, esdf, 0.2, 0.05));
  const auto once = shortenPath(zig, esdf, 0.2, 0.05);
  const auto twice = shortenPath(once, esdf, 0.2, 0.05);
  CHECK(once.length <= zig.length + 1e-12);
  CHECK(twice.waypoints == once.waypoints);
  CHECK(pathFree(once, esdf, 0.2, 0.05));
}

TEST_CASE("uvd separates sides of the cube") {
  const auto esdf = cubeBox();
  const auto left = TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(4, 5.3, 1.5), Vec3(7, 4, 1.5)});
  const auto left2 = TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(4, 5.6, 1.5), Vec3(7, 4, 1.5)});
  const auto right = TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(4, 2.7, 1.5), Vec3(7, 4, 1.5)});
  CHECK(uvdEquivalent(left, left2, 32, esdf, 0.2, 0.05));
  CHECK_FALSE(uvdEquivalent(left, right, 32, esdf, 0.2, 0.05));
}

TEST_CASE("path helpers") {
  const auto p = TopoPath::fromWaypoints({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0)});
  CHECK(p.length == doctest::Approx(2.0));
  CHECK((p.pointAt(0.5) - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK((p.pointAt(0.75) - Vec3(1, 0.5, 0)).norm() < 1e-12);
  CHECK(p.project(Vec3(1.3, 0.5, 0)) == doctest::Approx(0.75));
}

TEST_CASE("filter keeps unique short paths") {
  const auto esdf = cubeBox();
  TopoParams params;
  std::vector<TopoPath> paths{
    TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(4, 5.3, 1.5), Vec3(7, 4, 1.5)}),
    TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(4, 5.6, 1.5), Vec3(7, 4, 1.5)}),
    TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(4, 2.7, 1.5), Vec3(7, 4, 1.5)}),
    TopoPath::fromWaypoints({Vec3(1, 4, 1.5), Vec3(1, 40, 1.5), Vec3(7, 4, 1.5)}),
  };
  const auto kept = filterPaths(paths, esdf, params);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].length <= kept[1].length);
}

TEST_CASE("cube fixture yields two homotopy classes") {
  const auto esdf = cubeBox();
  GoalSequence goals;
  goals.positions = {Vec3(1.0, 4.0, 1.5), Vec3(7.0, 4.0, 1.5)};
  TopoParams params;
  const auto segs = topologicalPaths(goals, esdf, params, 42);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].size() >= 2);
  for (const auto& p : segs[0]) {
    CHECK(pathFree(p, esdf, params.d_c, params.step(esdf) / 10.0));
    CHECK((p.waypoints.front() - goals.positions[0]).norm() < 1e-12);
    CHECK((p.waypoints.back() - goals.positions[1]).norm() < 1e-12);
  }
}

TEST_CASE("blocked goal is unreachable") {
  GridGeometry g;
  g.dims = {40, 20, 20};
  g.resolution = 0.1;
  OccupancyGrid occ(g);
  occ.fillBox(Vec3(1.9, 0.0, 0.0), Vec3(2.1, 2.0, 2.0));
  const auto esdf = buildEsdf(occ, 2.0);
  GoalSequence goals;
  goals.positions = {Vec3(0.5, 1, 1), Vec3(3.5, 1, 1)};
  TopoParams params;
  params.max_rounds = 2;
  CHECK_THROWS(topologicalPaths(goals, esdf, params, 1));
}

TEST_CASE("segment streams are deterministic") {
  auto a = segmentRng(5, 2);
  auto b = segmentRng(5, 2);
  auto c = segmentRng(5, 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
}
