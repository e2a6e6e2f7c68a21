#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "safeteleop/depth_frame.hpp"

namespace safeteleop {

struct MapConfig {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d extent = Eigen::Vector3d(4.0, 4.0, 2.0);
  double resolution = 0.05;
  double log_odds_hit = 0.85;
  double log_odds_miss = -0.4;
  double log_odds_min = -3.5;
  double log_odds_max = 3.5;
  // Half-thickness of the surface shell marked occupied around a return.
  double occupied_band = 0.05;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
};

enum class VoxelClass { Free, Unknown, Occupied };

const char* to_string(VoxelClass c);

/// Dense voxel lattice over an axis-aligned box. Voxel (i, j, k) spans
/// origin + [i, i+1) * resolution along x (same for y, z). Linear index is
/// x-fastest: i + nx * (j + ny * k).
class GridGeometry {
 public:
  GridGeometry() = default;
  GridGeometry(const Eigen::Vector3d& origin, double resolution, const Eigen::Vector3i& dims);
  static GridGeometry from_config(const MapConfig& config);

  const Eigen::Vector3d& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const Eigen::Vector3i& dims() const { return dims_; }
  std::size_t num_voxels() const {
    return static_cast<std::size_t>(dims_.x()) * dims_.y() * dims_.z();
  }
  Eigen::Vector3d max_corner() const { return origin_ + dims_.cast<double>() * resolution_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_.x()) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_.y()) * k);
  }
  std::size_t index(const Eigen::Vector3i& v) const { return index(v.x(), v.y(), v.z()); }

  bool in_bounds(const Eigen::Vector3i& v) const {
    return (v.array() >= 0).all() && (v.array() < dims_.array()).all();
  }
  bool contains(const Eigen::Vector3d& x) const;

  /// Voxel containing x, or nullopt outside the volume.
  std::optional<Eigen::Vector3i> voxel_of(const Eigen::Vector3d& x) const;
  Eigen::Vector3d center(const Eigen::Vector3i& v) const {
    return origin_ + (v.cast<double>().array() + 0.5).matrix() * resolution_;
  }

  bool operator==(const GridGeometry&) const = default;

 private:
  Eigen::Vector3d origin_ = Eigen::Vector3d::Zero();
  double resolution_ = 1.0;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
};

inline VoxelClass classify_log_odds(float l) {
  if (l < 0.0f) return VoxelClass::Free;
  if (l > 0.0f) return VoxelClass::Occupied;
  return VoxelClass::Unknown;
}

inline double occupancy_probability(float l) { return 1.0 / (1.0 + std::exp(-static_cast<double>(l))); }

/// Immutable view of the occupancy cells at one point in time.
class GridSnapshot {
 public:
  GridSnapshot(MapConfig config, std::shared_ptr<const std::vector<float>> cells);

  const MapConfig& config() const { return config_; }
  const GridGeometry& geometry() const { return geometry_; }
  std::span<const float> cells() const { return *cells_; }

  float log_odds(const Eigen::Vector3i& v) const { return (*cells_)[geometry_.index(v)]; }
  VoxelClass classify(const Eigen::Vector3i& v) const { return classify_log_odds(log_odds(v)); }
  /// Throws std::out_of_range when x lies outside the mapped volume.
  VoxelClass classify(const Eigen::Vector3d& x) const;
  std::optional<VoxelClass> try_classify(const Eigen::Vector3d& x) const;

  /// True when both views alias the same cell buffer.
  bool shares_storage_with(const GridSnapshot& other) const { return cells_ == other.cells_; }

 private:
  MapConfig config_;
  GridGeometry geometry_;
  std::shared_ptr<const std::vector<float>> cells_;
};

/// One ray of a scan: unit direction from the sensor origin and the measured
/// range along it. Rays without a return carve free space up to `range`.
struct RayMeasurement {
  Eigen::Vector3d direction;
  double range = 0.0;
  bool has_return = true;
};

enum class IntegrationStatus { Integrated, Rejected };

/// Log-odds occupancy grid. Single writer; readers take snapshots.
/// Snapshots share storage with the grid until the next integration
/// (copy-on-write), so taking one is cheap.
class OccupancyGrid {
 public:
  explicit OccupancyGrid(const MapConfig& config);

  const MapConfig& config() const { return config_; }
  const GridGeometry& geometry() const { return geometry_; }
  std::span<const float> cells() const { return *cells_; }
  float log_odds(const Eigen::Vector3i& v) const { return (*cells_)[geometry_.index(v)]; }

  /// Inverse-sensor-model update from one depth image. The pose maps the
  /// optical frame into the world. Frames whose pixel count does not match
  /// the intrinsics, or with invalid intrinsics, are rejected untouched.
  IntegrationStatus integrate_depth_frame(const DepthFrame& frame, const Eigen::Isometry3d& sensor_pose);

  /// Each voxel receives at most one update per scan; a hit beats a miss.
  void integrate_scan(const Eigen::Vector3d& origin, std::span<const RayMeasurement> rays);

  VoxelClass classify(const Eigen::Vector3d& x) const;
  GridSnapshot snapshot() const;

 private:
  void trace(const Eigen::Vector3d& origin, const RayMeasurement& ray);
  void mark(std::size_t idx, std::uint8_t kind);

  MapConfig config_;
  GridGeometry geometry_;
  std::shared_ptr<std::vector<float>> cells_;
  // Per-scan scratch: 0 untouched, 1 miss, 2 hit.
  std::vector<std::uint8_t> marks_;
  std::vector<std::size_t> touched_;
};

/// Binary grid dump; layout documented in docs/formats.md.
void write_grid(std::ostream& os, const GridSnapshot& grid);
GridSnapshot read_grid(std::istream& is);

}  // namespace safeteleop
