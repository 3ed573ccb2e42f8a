#include "mtp/env_map.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace mtp {

bool GridGeometry::valid() const {
  return dims[0] >= 1 && dims[1] >= 1 && dims[2] >= 1 && resolution > 0.0 &&
         std::isfinite(resolution) && origin.allFinite();
}

bool GridGeometry::contains(const Vec3& p) const {
  const Vec3 hi = maxCorner();
  return p.allFinite() && (p.array() >= origin.array()).all() &&
         (p.array() <= hi.array()).all();
}

OccupancyGrid::OccupancyGrid(const GridGeometry& geometry) : geometry_(geometry) {
  if (!geometry.valid()) throw std::invalid_argument("invalid grid geometry");
  cells_.assign(geometry.cellCount(), 0);
}

void OccupancyGrid::fillBox(const Vec3& lo, const Vec3& hi) {
  const auto& g = geometry_;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 c = g.voxelCenter(i, j, k);
        if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all())
          set(i, j, k, true);
      }
}

void OccupancyGrid::fillCylinder(const Vec3& base_center, double radius,
                                 double height) {
  const auto& g = geometry_;
  for (int k = 0; k < g.dims[2]; ++k)
    for (int j = 0; j < g.dims[1]; ++j)
      for (int i = 0; i < g.dims[0]; ++i) {
        const Vec3 c = g.voxelCenter(i, j, k);
        const double dz = c.z() - base_center.z();
        if (dz < 0.0 || dz > height) continue;
        if ((c.head<2>() - base_center.head<2>()).norm() <= radius) set(i, j, k, true);
      }
}

EsdfGrid::EsdfGrid(const GridGeometry& geometry, std::vector<float> dist,
                   double d_sat)
    : geometry_(geometry), dist_(std::move(dist)), d_sat_(d_sat) {
  if (!geometry_.valid()) throw std::invalid_argument("invalid grid geometry");
  if (dist_.size() != geometry_.cellCount())
    throw std::invalid_argument("distance payload does not match grid dims");
}

std::optional<double> EsdfGrid::distanceAt(const Vec3& p) const {
  const auto& g = geometry_;
  if (!g.contains(p)) return std::nullopt;
  // continuous index relative to voxel centers, clamped to the center lattice
  double u[3];
  int lo[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    u[a] = (p[a] - g.origin[a]) / g.resolution - 0.5;
    u[a] = std::clamp(u[a], 0.0, static_cast<double>(g.dims[a] - 1));
    lo[a] = std::min(static_cast<int>(std::floor(u[a])), std::max(g.dims[a] - 2, 0));
    frac[a] = g.dims[a] > 1 ? u[a] - lo[a] : 0.0;
  }
  const int hi0 = std::min(lo[0] + 1, g.dims[0] - 1);
  const int hi1 = std::min(lo[1] + 1, g.dims[1] - 1);
  const int hi2 = std::min(lo[2] + 1, g.dims[2] - 1);
  const double c000 = at(lo[0], lo[1], lo[2]);
  const double c100 = at(hi0, lo[1], lo[2]);
  const double c010 = at(lo[0], hi1, lo[2]);
  const double c110 = at(hi0, hi1, lo[2]);
  const double c001 = at(lo[0], lo[1], hi2);
  const double c101 = at(hi0, lo[1], hi2);
  const double c011 = at(lo[0], hi1, hi2);
  const double c111 = at(hi0, hi1, hi2);
  const double c00 = c000 + frac[0] * (c100 - c000);
  const double c10 = c010 + frac[0] * (c110 - c010);
  const double c01 = c001 + frac[0] * (c101 - c001);
  const double c11 = c011 + frac[0] * (c111 - c011);
  const double c0 = c00 + frac[1] * (c10 - c00);
  const double c1 = c01 + frac[1] * (c11 - c01);
  return c0 + frac[2] * (c1 - c0);
}

bool EsdfGrid::isPositionFree(const Vec3& p, double d_c) const {
  const auto d = distanceAt(p);
  return d.has_value() && *d > d_c;
}

bool EsdfGrid::isSegmentFree(const Vec3& a, const Vec3& b, double d_c,
                             double step) const {
  if (!(step > 0.0)) throw std::invalid_argument("segment step must be positive");
  // canonical endpoint order so that (a,b) and (b,a) sample identical points
  const bool swap = std::lexicographical_compare(b.data(), b.data() + 3, a.data(),
                                                 a.data() + 3);
  const Vec3& from = swap ? b : a;
  const Vec3& to = swap ? a : b;
  const double len = (to - from).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  auto clearance = [&](double s) {
    const auto d = distanceAt(s >= 1.0 ? to : Vec3(from + s * (to - from)));
    return d.value_or(-std::numeric_limits<double>::infinity());
  };
  // The interpolated field has gradient norm at most sqrt(3), so between
  // two points the clearance cannot drop below (d0 + d1 - sqrt(3) l) / 2.
  // Intervals this bound does not clear are bisected.
  const double lipschitz = std::sqrt(3.0);
  std::function<bool(double, double, double, double)> certified =
    [&](double s0, double d0, double s1, double d1) {
      const double l = (s1 - s0) * len;
      if (0.5 * (d0 + d1 - lipschitz * l) > d_c || l < 1e-6) return true;
      const double sm = 0.5 * (s0 + s1), dm = clearance(sm);
      return dm > d_c && certified(s0, d0, sm, dm) && certified(sm, dm, s1, d1);
    };
  double s_prev = 0.0, d_prev = clearance(0.0);
  if (!(d_prev > d_c)) return false;
  for (int i = 1; i <= n; ++i) {
    const double s = static_cast<double>(i) / n, d = clearance(s);
    if (!(d > d_c) || !certified(s_prev, d_prev, s, d)) return false;
    s_prev = s;
    d_prev = d;
  }
  return true;
}

namespace {

// 1D squared distance transform of a sampled function (Felzenszwalb &
// Huttenlocher lower envelope of parabolas).
void distanceTransform1d(const double* f, double* d, int n, std::vector<int>& v,
                         std::vector<double>& z) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  v.resize(n);
  z.resize(n + 1);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    double s;
    while (true) {
      const int r = v[k];
      s = ((f[q] + double(q) * q) - (f[r] + double(r) * r)) / (2.0 * (q - r));
      if (s <= z[k] && k > 0) {
        --k;
      } else {
        break;
      }
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double diff = q - v[j];
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

EsdfGrid buildEsdf(const OccupancyGrid& occ, double d_sat) {
  const auto& g = occ.geometry();
  if (!g.valid() || occ.cells().size() != g.cellCount() || g.cellCount() == 0)
    throw std::invalid_argument("empty or invalid occupancy grid");
  if (!(d_sat > 0.0)) throw std::invalid_argument("d_sat must be positive");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t total = g.cellCount();
  std::vector<double> sq(total);
  for (std::size_t i = 0; i < total; ++i) sq[i] = occ.cells()[i] ? 0.0 : kInf;

  const int n_max = std::max({g.dims[0], g.dims[1], g.dims[2]});
  std::vector<double> line_in(n_max), line_out(n_max);
  std::vector<int> v;
  std::vector<double> z;

  auto pass = [&](int axis) {
    const int a1 = (axis + 1) % 3;
    const int a2 = (axis + 2) % 3;
    const int n = g.dims[axis];
    for (int c2 = 0; c2 < g.dims[a2]; ++c2)
      for (int c1 = 0; c1 < g.dims[a1]; ++c1) {
        int idx[3];
        idx[a1] = c1;
        idx[a2] = c2;
        for (int q = 0; q < n; ++q) {
          idx[axis] = q;
          line_in[q] = sq[g.index(idx[0], idx[1], idx[2])];
        }
        distanceTransform1d(line_in.data(), line_out.data(), n, v, z);
        for (int q = 0; q < n; ++q) {
          idx[axis] = q;
          sq[g.index(idx[0], idx[1], idx[2])] = line_out[q];
        }
      }
  };
  pass(0);
  pass(1);
  pass(2);

  std::vector<float> dist(total);
  for (std::size_t i = 0; i < total; ++i) {
    const double d = std::isfinite(sq[i]) ? std::sqrt(sq[i]) * g.resolution : kInf;
    dist[i] = static_cast<float>(std::min(d, d_sat));
  }
  return EsdfGrid(g, std::move(dist), d_sat);
}

}  // namespace mtp
