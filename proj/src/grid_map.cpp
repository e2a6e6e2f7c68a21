#include "safeteleop/grid_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace safeteleop {

namespace {

constexpr std::uint8_t kMiss = 1;
constexpr std::uint8_t kHit = 2;
// Slack on ray-parameter comparisons so voxel faces that coincide with a
// threshold classify the same way regardless of rounding.
constexpr double kParamTol = 1e-9;

}  // namespace

void MapConfig::validate() const {
  if (!(resolution > 0.0)) throw std::invalid_argument("map resolution must be positive");
  if (!(extent.array() > 0.0).all()) throw std::invalid_argument("map extent must be positive");
  if (!(log_odds_min < 0.0 && log_odds_max > 0.0))
    throw std::invalid_argument("log-odds bounds must straddle zero");
  if (!(log_odds_hit > 0.0)) throw std::invalid_argument("log_odds_hit must be positive");
  if (!(log_odds_miss < 0.0)) throw std::invalid_argument("log_odds_miss must be negative");
  if (!(occupied_band >= 0.0)) throw std::invalid_argument("occupied_band must be non-negative");
}

const char* to_string(VoxelClass c) {
  switch (c) {
    case VoxelClass::Free: return "Free";
    case VoxelClass::Unknown: return "Unknown";
    case VoxelClass::Occupied: return "Occupied";
  }
  return "?";
}

GridGeometry::GridGeometry(const Eigen::Vector3d& origin, double resolution, const Eigen::Vector3i& dims)
    : origin_(origin), resolution_(resolution), dims_(dims) {
  if (!(resolution > 0.0) || (dims.array() <= 0).any())
    throw std::invalid_argument("grid geometry needs positive resolution and dimensions");
}

GridGeometry GridGeometry::from_config(const MapConfig& config) {
  config.validate();
  Eigen::Vector3i dims;
  for (int a = 0; a < 3; ++a)
    dims[a] = std::max(1, static_cast<int>(std::ceil(config.extent[a] / config.resolution - 1e-9)));
  return GridGeometry(config.origin, config.resolution, dims);
}

bool GridGeometry::contains(const Eigen::Vector3d& x) const {
  const Eigen::Vector3d hi = max_corner();
  return (x.array() >= origin_.array()).all() && (x.array() <= hi.array()).all();
}

std::optional<Eigen::Vector3i> GridGeometry::voxel_of(const Eigen::Vector3d& x) const {
  if (!contains(x)) return std::nullopt;
  Eigen::Vector3i v;
  for (int a = 0; a < 3; ++a) {
    const int i = static_cast<int>(std::floor((x[a] - origin_[a]) / resolution_));
    v[a] = std::clamp(i, 0, dims_[a] - 1);  // the max face belongs to the last voxel
  }
  return v;
}

GridSnapshot::GridSnapshot(MapConfig config, std::shared_ptr<const std::vector<float>> cells)
    : config_(std::move(config)), geometry_(GridGeometry::from_config(config_)), cells_(std::move(cells)) {
  if (!cells_ || cells_->size() != geometry_.num_voxels())
    throw std::invalid_argument("snapshot cell count does not match map config");
}

VoxelClass GridSnapshot::classify(const Eigen::Vector3d& x) const {
  const auto v = geometry_.voxel_of(x);
  if (!v) throw std::out_of_range("point outside mapped volume");
  return classify(*v);
}

std::optional<VoxelClass> GridSnapshot::try_classify(const Eigen::Vector3d& x) const {
  const auto v = geometry_.voxel_of(x);
  if (!v) return std::nullopt;
  return classify(*v);
}

OccupancyGrid::OccupancyGrid(const MapConfig& config)
    : config_(config),
      geometry_(GridGeometry::from_config(config)),
      cells_(std::make_shared<std::vector<float>>(geometry_.num_voxels(), 0.0f)),
      marks_(geometry_.num_voxels(), 0) {}

VoxelClass OccupancyGrid::classify(const Eigen::Vector3d& x) const {
  const auto v = geometry_.voxel_of(x);
  if (!v) throw std::out_of_range("point outside mapped volume");
  return classify_log_odds(log_odds(*v));
}

GridSnapshot OccupancyGrid::snapshot() const { return GridSnapshot(config_, cells_); }

IntegrationStatus OccupancyGrid::integrate_depth_frame(const DepthFrame& frame,
                                                       const Eigen::Isometry3d& sensor_pose) {
  const Intrinsics& in = frame.intrinsics;
  if (!in.valid() || !(frame.max_range > 0.0) ||
      frame.depth.size() != static_cast<std::size_t>(in.width) * in.height)
    return IntegrationStatus::Rejected;

  const Eigen::Matrix3d rotation = sensor_pose.linear();
  std::vector<RayMeasurement> rays;
  rays.reserve(frame.depth.size());
  for (int v = 0; v < in.height; ++v) {
    for (int u = 0; u < in.width; ++u) {
      const double d = frame.at(u, v);
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Eigen::Vector3d ray = in.pixel_ray(u, v);
      const double scale = ray.norm();
      RayMeasurement m;
      m.direction = rotation * (ray / scale);
      if (d >= frame.max_range) {
        m.range = frame.max_range * scale;
        m.has_return = false;
      } else {
        m.range = d * scale;
      }
      rays.push_back(m);
    }
  }
  integrate_scan(sensor_pose.translation(), rays);
  return IntegrationStatus::Integrated;
}

void OccupancyGrid::integrate_scan(const Eigen::Vector3d& origin, std::span<const RayMeasurement> rays) {
  for (const RayMeasurement& ray : rays) trace(origin, ray);
  if (touched_.empty()) return;

  // Live snapshots keep the old buffer.
  if (cells_.use_count() > 1) cells_ = std::make_shared<std::vector<float>>(*cells_);
  std::vector<float>& cells = *cells_;
  const float lo = static_cast<float>(config_.log_odds_min);
  const float hi = static_cast<float>(config_.log_odds_max);
  const float hit = static_cast<float>(config_.log_odds_hit);
  const float miss = static_cast<float>(config_.log_odds_miss);
  for (std::size_t idx : touched_) {
    const float delta = marks_[idx] == kHit ? hit : miss;
    cells[idx] = std::clamp(cells[idx] + delta, lo, hi);
    marks_[idx] = 0;
  }
  touched_.clear();
}

void OccupancyGrid::mark(std::size_t idx, std::uint8_t kind) {
  if (marks_[idx] == 0) touched_.push_back(idx);
  marks_[idx] = std::max(marks_[idx], kind);
}

// Exact voxel walk (Amanatides & Woo): every voxel the segment crosses is
// visited once, in order, together with its entry/exit ray parameters.
void OccupancyGrid::trace(const Eigen::Vector3d& origin, const RayMeasurement& ray) {
  const double band = config_.occupied_band;
  const double length = ray.has_return ? ray.range + band : ray.range;
  if (!(length > 0.0) || !ray.direction.allFinite()) return;
  const Eigen::Vector3d& dir = ray.direction;

  const Eigen::Vector3d lo = geometry_.origin();
  const Eigen::Vector3d hi = geometry_.max_corner();
  double t_enter = 0.0;
  double t_exit = length;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return;
      continue;
    }
    double t0 = (lo[a] - origin[a]) / dir[a];
    double t1 = (hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter >= t_exit) return;

  const double res = geometry_.resolution();
  const Eigen::Vector3i& dims = geometry_.dims();
  const Eigen::Vector3d start = origin + dir * t_enter;
  Eigen::Vector3i voxel;
  Eigen::Vector3i step;
  Eigen::Vector3d t_max;
  Eigen::Vector3d t_delta;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    voxel[a] = std::clamp(static_cast<int>(std::floor((start[a] - lo[a]) / res)), 0, dims[a] - 1);
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (lo[a] + (voxel[a] + 1) * res - origin[a]) / dir[a];
      t_delta[a] = res / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (lo[a] + voxel[a] * res - origin[a]) / dir[a];
      t_delta[a] = -res / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = kInf;
      t_delta[a] = kInf;
    }
  }

  const double free_until = ray.has_return ? ray.range - band : ray.range;
  const double hit_until = ray.range + band;
  double t0 = t_enter;
  while (t0 < t_exit) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    const double t1 = t_max[axis];
    const std::size_t idx = geometry_.index(voxel);
    if (t1 <= free_until + kParamTol) {
      mark(idx, kMiss);
    } else if (ray.has_return && t0 < hit_until - kParamTol) {
      mark(idx, kHit);
    } else {
      break;
    }
    voxel[axis] += step[axis];
    if (voxel[axis] < 0 || voxel[axis] >= dims[axis]) break;
    t_max[axis] += t_delta[axis];
    t0 = t1;
  }
}

}  // namespace safeteleop
