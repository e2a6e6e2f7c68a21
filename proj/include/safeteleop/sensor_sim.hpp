#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "safeteleop/depth_frame.hpp"

namespace safeteleop {

/// Axis-aligned solid box.
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

/// Infinite horizontal ground; everything with z <= height is solid.
struct GroundPlane {
  double height = 0.0;
};

using Primitive = std::variant<Box, Sphere, GroundPlane>;

struct Scene {
  std::vector<Primitive> primitives;
};

/// Distance along the unit direction to the first surface point. A ray
/// starting inside the solid is blocked at 0.
std::optional<double> ray_hit(const Primitive& prim, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);
std::optional<double> ray_hit(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

/// Strict interior test.
bool contains(const Primitive& prim, const Eigen::Vector3d& p);

/// Signed distance to the surface (negative inside).
double signed_distance(const Primitive& prim, const Eigen::Vector3d& p);
double signed_distance(const Scene& scene, const Eigen::Vector3d& p);

enum class NoReturnPolicy {
  Invalid,   // pixel set to 0
  MaxRange,  // pixel set to max_range, carved as free space up to it
};

struct RenderOptions {
  double max_range = 6.0;
  NoReturnPolicy no_return = NoReturnPolicy::MaxRange;
  // Gaussian depth noise sigma = noise_sigma_rel * depth.
  double noise_sigma_rel = 0.0;
  std::uint64_t seed = 0;
};

/// Ray-casts every pixel. `camera_pose` maps the optical frame (x right,
/// y down, z forward) into the world. Deterministic for a given seed.
DepthFrame render_depth(const Scene& scene, const Eigen::Isometry3d& camera_pose, const Intrinsics& intrinsics,
                        const RenderOptions& options = {});

/// Mounting of the depth camera on the vehicle. Body frame: x forward, y left, z up.
struct CameraRig {
  Eigen::Isometry3d body_to_camera = forward_facing_extrinsic();

  static Eigen::Isometry3d forward_facing_extrinsic();

  /// Optical-to-world pose for a vehicle at `position` with heading `yaw`
  /// and camera tilt `pitch` (positive looks up), radians.
  Eigen::Isometry3d camera_pose(const Eigen::Vector3d& position, double yaw, double pitch = 0.0) const;
};

}  // namespace safeteleop
