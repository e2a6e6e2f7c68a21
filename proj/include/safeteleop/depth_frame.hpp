#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace safeteleop {

/// Pinhole intrinsics. Pixel (u, v) looks along ((u - cx) / fx, (v - cy) / fy, 1)
/// in the optical frame (x right, y down, z forward).
struct Intrinsics {
  int width = 640;
  int height = 480;
  double fx = 320.0;
  double fy = 320.0;
  double cx = 319.5;
  double cy = 239.5;

  /// Square pixels, principal point at the image center.
  static Intrinsics from_horizontal_fov(int width, int height, double hfov_rad);

  bool valid() const;

  Eigen::Vector3d pixel_ray(int u, int v) const {
    return {(u - cx) / fx, (v - cy) / fy, 1.0};
  }
};

/// Depth along the optical axis in meters, row-major (v * width + u).
/// 0 marks an invalid pixel. Values >= max_range mean "no return within range".
struct DepthFrame {
  Intrinsics intrinsics;
  double max_range = 6.0;
  std::vector<float> depth;

  float at(int u, int v) const { return depth[static_cast<std::size_t>(v) * intrinsics.width + u]; }
};

}  // namespace safeteleop
