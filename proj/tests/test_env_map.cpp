#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mtp/env_map.hpp"
#include "mtp/map_io.hpp"

using namespace mtp;

namespace {

GridGeometry cube(int n, double res = 1.0) {
  GridGeometry g;
  g.dims = {n, n, n};
  g.resolution = res;
  g.origin = Vec3::Zero();
  return g;
}

// Reference distance: minimum over all occupied voxel centers.
double bruteForce(const OccupancyGrid& occ, int i, int j, int k, double d_sat) {
  const auto& g = occ.geometry();
  double best = d_sat;
  const Vec3 c = g.voxelCenter(i, j, k);
  for (int z = 0; z < g.dims[2]; ++z)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int x = 0; x < g.dims[0]; ++x)
        if (occ.occupied(x, y, z)) best = std::min(best, (g.voxelCenter(x, y, z) - c).norm());
  return best;
}

}  // namespace

TEST_CASE("free grid saturates") {
  OccupancyGrid occ(cube(4));
  const auto esdf = buildEsdf(occ, 10.0);
  for (float d : esdf.data()) CHECK(d == doctest::Approx(10.0));
}

TEST_CASE("fully occupied grid is zero") {
  OccupancyGrid occ(cube(4));
  for (auto& c : occ.cells()) c = 1;
  const auto esdf = buildEsdf(occ, 10.0);
  for (float d : esdf.data()) CHECK(d == 0.0f);
}

TEST_CASE("single voxel distance") {
  OccupancyGrid occ(cube(4));
  occ.set(0, 0, 0, true);
  const auto esdf = buildEsdf(occ, 10.0);
  CHECK(esdf.at(3, 0, 0) == doctest::Approx(3.0));
  CHECK(esdf.at(3, 3, 3) == doctest::Approx(std::sqrt(27.0)));
}

TEST_CASE("empty grid rejected") {
  GridGeometry g = cube(4);
  g.dims = {0, 4, 4};
  OccupancyGrid occ;
  CHECK_THROWS_AS(buildEsdf(occ, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(buildEsdf(OccupancyGrid(cube(2)), 0.0), std::invalid_argument);
}

TEST_CASE("transform matches brute force on random grids") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 6; ++trial) {
    const int n = trial < 3 ? 8 : 16;
    OccupancyGrid occ(cube(n, 0.25));
    std::bernoulli_distribution occupied(trial % 2 ? 0.02 : 0.1);
    for (auto& c : occ.cells()) c = occupied(rng) ? 1 : 0;
    const double d_sat = 2.0;
    const auto esdf = buildEsdf(occ, d_sat);
    int mismatches = 0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
          const double ref = bruteForce(occ, i, j, k, d_sat);
          if (std::abs(esdf.at(i, j, k) - ref) > 1e-5) ++mismatches;
        }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("lipschitz bound and range") {
  std::mt19937_64 rng(3);
  OccupancyGrid occ(cube(12, 0.1));
  std::bernoulli_distribution occupied(0.05);
  for (auto& c : occ.cells()) c = occupied(rng) ? 1 : 0;
  const auto esdf = buildEsdf(occ, 0.5);
  const auto& g = esdf.geometry();
  for (int k = 0; k < 12; ++k)
    for (int j = 0; j < 12; ++j)
      for (int i = 0; i + 1 < 12; ++i) {
        CHECK(esdf.at(i, j, k) >= 0.0);
        CHECK(esdf.at(i, j, k) <= 0.5 + 1e-6);
        CHECK(std::abs(esdf.at(i, j, k) - esdf.at(i + 1, j, k)) <= g.resolution * std::sqrt(3.0) + 1e-6);
      }
}

TEST_CASE("trilinear interpolation") {
  GridGeometry g = cube(2);
  std::vector<float> d{2, 4, 2, 4, 2, 4, 2, 4};
  EsdfGrid esdf(g, d, 10.0);
  CHECK(*esdf.distanceAt(g.voxelCenter(0, 0, 0)) == doctest::Approx(2.0));
  CHECK(*esdf.distanceAt(g.voxelCenter(1, 1, 1)) == doctest::Approx(4.0));
  CHECK(*esdf.distanceAt(Vec3(1.0, 0.5, 0.5)) == doctest::Approx(3.0));

  std::vector<float> d2{0, 1, 0, 1, 0, 1, 0, 1};
  EsdfGrid ramp(g, d2, 10.0);
  CHECK(*ramp.distanceAt(Vec3(0.75, 0.5, 0.5)) == doctest::Approx(0.25));
  CHECK_FALSE(ramp.distanceAt(Vec3(-0.1, 0.5, 0.5)).has_value());
  CHECK_FALSE(ramp.distanceAt(Vec3(0.5, 0.5, 2.1)).has_value());
}

TEST_CASE("position predicate") {
  OccupancyGrid occ(cube(4));
  const auto esdf = buildEsdf(occ, 10.0);
  CHECK(esdf.isPositionFree(Vec3(2, 2, 2), 0.2));
  CHECK_FALSE(esdf.isPositionFree(Vec3(5, 2, 2), 0.2));

  GridGeometry g = cube(2);
  EsdfGrid flat(g, std::vector<float>(8, 0.2f), 1.0);
  // strict inequality: exactly d_c is a collision
  CHECK_FALSE(flat.isPositionFree(Vec3(1, 1, 1), static_cast<double>(0.2f)));
  CHECK(flat.isPositionFree(Vec3(1, 1, 1), 0.1));
}

TEST_CASE("segment predicate") {
  OccupancyGrid occ(cube(10, 0.1));
  occ.set(5, 5, 5, true);
  const auto esdf = buildEsdf(occ, 1.0);
  const Vec3 a(0.05, 0.55, 0.55), b(0.95, 0.55, 0.55);
  const double d_c = 0.05;
  CHECK(esdf.isSegmentFree(a, a, d_c));
  CHECK_FALSE(esdf.isPositionFree(Vec3(0.55, 0.55, 0.55), d_c));
  CHECK_FALSE(esdf.isSegmentFree(a, b, d_c));
  CHECK_FALSE(esdf.isSegmentFree(b, a, d_c));
  // a step longer than the segment samples only the endpoints, which are free
  CHECK_FALSE(esdf.isSegmentFree(a, b, d_c, 10.0));

  // dense oracle at step/10 agrees with the predicate on random segments
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0, disagreements = 0;
  for (int n = 0; n < 300; ++n) {
    const Vec3 p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
    const double step = 0.05;
    const bool fwd = esdf.isSegmentFree(p, q, d_c, step);
    CHECK(fwd == esdf.isSegmentFree(q, p, d_c, step));
    if (!fwd) continue;
    // a free verdict must not hide a dense-sampled collision in the interior
    const int m = static_cast<int>(std::ceil((q - p).norm() / (step / 10))) + 1;
    for (int s = 0; s <= m; ++s) {
      const Vec3 x = p + (q - p) * (static_cast<double>(s) / m);
      if (!esdf.isPositionFree(x, d_c)) ++disagreements;
    }
    ++checked;
  }
  CHECK(checked > 0);
  CHECK(disagreements == 0);

  OccupancyGrid open(cube(10, 0.1));
  const auto free_esdf = buildEsdf(open, 1.0);
  CHECK(free_esdf.isSegmentFree(Vec3(0.05, 0.05, 0.05), Vec3(0.95, 0.95, 0.95), 0.2));
}

TEST_CASE("shrinking clearance never adds collisions") {
  std::mt19937_64 rng(5);
  OccupancyGrid occ(cube(10, 0.1));
  std::bernoulli_distribution occupied(0.05);
  for (auto& c : occ.cells()) c = occupied(rng) ? 1 : 0;
  const auto esdf = buildEsdf(occ, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    const Vec3 p(u(rng), u(rng), u(rng));
    if (esdf.isPositionFree(p, 0.15)) CHECK(esdf.isPositionFree(p, 0.1));
  }
}

TEST_CASE("map and cache round trip") {
  GridGeometry g;
  g.dims = {5, 4, 3};
  g.resolution = 0.2;
  g.origin = Vec3(-1.0, 0.5, 0.0);
  OccupancyGrid occ(g);
  occ.fillBox(Vec3(-0.6, 0.7, 0.0), Vec3(-0.2, 1.1, 0.3));
  std::stringstream ss;
  writeVoxmap(ss, occ);
  const auto back = readVoxmap(ss);
  CHECK(back.geometry() == g);
  CHECK(back.cells() == occ.cells());

  const auto esdf = buildEsdf(occ, 3.0);
  std::stringstream bin;
  writeEsdfCache(bin, esdf);
  const auto esdf2 = readEsdfCache(bin);
  CHECK(esdf2.geometry() == g);
  CHECK(esdf2.data() == esdf.data());
  CHECK(esdf2.saturation() == 3.0);

  std::stringstream bad("voxmap 2\n");
  CHECK_THROWS_AS(readVoxmap(bad), MapFormatError);
}
