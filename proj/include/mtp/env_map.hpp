#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace mtp {

using Vec3 = Eigen::Vector3d;

/// Geometry shared by occupancy and distance grids. Voxel (i,j,k) spans
/// [origin + (i,j,k)*resolution, origin + (i+1,j+1,k+1)*resolution).
struct GridGeometry {
  std::array<int, 3> dims{1, 1, 1};
  double resolution = 1.0;
  Vec3 origin = Vec3::Zero();

  std::size_t cellCount() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  // x-fastest linear index
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
             (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  Vec3 voxelCenter(int i, int j, int k) const {
    return origin + resolution * Vec3(i + 0.5, j + 0.5, k + 0.5);
  }
  Vec3 maxCorner() const {
    return origin + resolution * Vec3(dims[0], dims[1], dims[2]);
  }
  bool contains(const Vec3& p) const;
  bool valid() const;

  bool operator==(const GridGeometry& o) const {
    return dims == o.dims && resolution == o.resolution && origin == o.origin;
  }
};

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridGeometry& geometry);

  const GridGeometry& geometry() const { return geometry_; }
  bool occupied(int i, int j, int k) const { return cells_[geometry_.index(i, j, k)] != 0; }
  void set(int i, int j, int k, bool occ) { cells_[geometry_.index(i, j, k)] = occ ? 1 : 0; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }
  std::vector<std::uint8_t>& cells() { return cells_; }

  /// Marks every voxel whose center lies in the axis-aligned box [lo, hi].
  void fillBox(const Vec3& lo, const Vec3& hi);
  /// Marks every voxel whose center lies in a vertical cylinder.
  void fillCylinder(const Vec3& base_center, double radius, double height);

 private:
  GridGeometry geometry_;
  std::vector<std::uint8_t> cells_;
};

/// Distance (m) from every voxel center to the nearest occupied voxel
/// center, saturated at d_sat. Immutable after construction.
class EsdfGrid {
 public:
  EsdfGrid(const GridGeometry& geometry, std::vector<float> dist, double d_sat);

  const GridGeometry& geometry() const { return geometry_; }
  double saturation() const { return d_sat_; }
  double at(int i, int j, int k) const { return dist_[geometry_.index(i, j, k)]; }
  const std::vector<float>& data() const { return dist_; }

  /// Trilinear interpolation between voxel centers; nullopt outside the grid.
  std::optional<double> distanceAt(const Vec3& p) const;

  /// True iff p is inside the grid and its distance is strictly above d_c.
  bool isPositionFree(const Vec3& p, double d_c) const;

  /// Samples [a,b] at spacing <= step including both endpoints and bisects
  /// between samples until the whole segment is certified above d_c.
  /// Symmetric in (a,b) bit-for-bit.
  bool isSegmentFree(const Vec3& a, const Vec3& b, double d_c, double step) const;
  bool isSegmentFree(const Vec3& a, const Vec3& b, double d_c) const {
    return isSegmentFree(a, b, d_c, 0.5 * geometry_.resolution);
  }

 private:
  GridGeometry geometry_;
  std::vector<float> dist_;
  double d_sat_;
};

/// Exact Euclidean distance transform (separable squared-distance passes).
EsdfGrid buildEsdf(const OccupancyGrid& occ, double d_sat);

}  // namespace mtp
