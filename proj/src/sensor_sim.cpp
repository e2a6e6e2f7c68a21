#include "safeteleop/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace safeteleop {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::optional<double> hit_box(const Box& b, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const Eigen::Vector3d lo = b.center - 0.5 * b.size;
  const Eigen::Vector3d hi = b.center + 0.5 * b.size;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_far < 0.0) return std::nullopt;
  return std::max(t_near, 0.0);
}

std::optional<double> hit_sphere(const Sphere& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const Eigen::Vector3d oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  if (c <= 0.0) return 0.0;
  const double disc = b * b - c;
  if (disc < 0.0 || b > 0.0) return std::nullopt;
  return -b - std::sqrt(disc);
}

std::optional<double> hit_ground(const GroundPlane& g, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  if (o.z() <= g.height) return 0.0;
  if (d.z() >= 0.0) return std::nullopt;
  return (g.height - o.z()) / d.z();
}

}  // namespace

std::optional<double> ray_hit(const Primitive& prim, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  const Eigen::Vector3d d = dir.normalized();
  return std::visit(Overloaded{[&](const Box& b) { return hit_box(b, origin, d); },
                               [&](const Sphere& s) { return hit_sphere(s, origin, d); },
                               [&](const GroundPlane& g) { return hit_ground(g, origin, d); }},
                    prim);
}

std::optional<double> ray_hit(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  std::optional<double> best;
  for (const Primitive& p : scene.primitives) {
    const auto t = ray_hit(p, origin, dir);
    if (t && (!best || *t < *best)) best = t;
  }
  return best;
}

bool contains(const Primitive& prim, const Eigen::Vector3d& p) { return signed_distance(prim, p) < 0.0; }

double signed_distance(const Primitive& prim, const Eigen::Vector3d& p) {
  return std::visit(Overloaded{[&](const Box& b) {
                                 const Eigen::Vector3d q = (p - b.center).cwiseAbs() - 0.5 * b.size;
                                 return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
                               },
                               [&](const Sphere& s) { return (p - s.center).norm() - s.radius; },
                               [&](const GroundPlane& g) { return p.z() - g.height; }},
                    prim);
}

double signed_distance(const Scene& scene, const Eigen::Vector3d& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Primitive& prim : scene.primitives) best = std::min(best, signed_distance(prim, p));
  return best;
}

DepthFrame render_depth(const Scene& scene, const Eigen::Isometry3d& camera_pose, const Intrinsics& intrinsics,
                        const RenderOptions& options) {
  DepthFrame frame;
  frame.intrinsics = intrinsics;
  frame.max_range = options.max_range;
  frame.depth.assign(static_cast<std::size_t>(intrinsics.width) * intrinsics.height, 0.0f);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Eigen::Matrix3d rotation = camera_pose.linear();
  const Eigen::Vector3d origin = camera_pose.translation();
  const float no_return = options.no_return == NoReturnPolicy::MaxRange ? static_cast<float>(options.max_range) : 0.0f;

  for (int v = 0; v < intrinsics.height; ++v) {
    for (int u = 0; u < intrinsics.width; ++u) {
      const Eigen::Vector3d ray = intrinsics.pixel_ray(u, v);
      const double norm = ray.norm();
      const auto t = ray_hit(scene, origin, rotation * ray / norm);
      float& out = frame.depth[static_cast<std::size_t>(v) * intrinsics.width + u];
      if (!t) {
        out = no_return;
        continue;
      }
      if (*t <= 0.0) continue;  // camera inside a solid
      double depth = *t / norm;
      if (options.noise_sigma_rel > 0.0) depth += options.noise_sigma_rel * depth * noise(rng);
      if (depth >= options.max_range) {
        out = no_return;
      } else if (depth > 0.0) {
        out = static_cast<float>(depth);
      }
    }
  }
  return frame;
}

Intrinsics Intrinsics::from_horizontal_fov(int width, int height, double hfov_rad) {
  Intrinsics in;
  in.width = width;
  in.height = height;
  in.fx = 0.5 * width / std::tan(0.5 * hfov_rad);
  in.fy = in.fx;
  in.cx = 0.5 * (width - 1);
  in.cy = 0.5 * (height - 1);
  return in;
}

bool Intrinsics::valid() const {
  return width > 0 && height > 0 && fx > 0.0 && fy > 0.0 && std::isfinite(cx) && std::isfinite(cy);
}

Eigen::Isometry3d CameraRig::forward_facing_extrinsic() {
  Eigen::Matrix3d r;
  // Columns: optical x, y, z axes expressed in the body frame.
  r.col(0) = Eigen::Vector3d(0, -1, 0);
  r.col(1) = Eigen::Vector3d(0, 0, -1);
  r.col(2) = Eigen::Vector3d(1, 0, 0);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = r;
  return t;
}

Eigen::Isometry3d CameraRig::camera_pose(const Eigen::Vector3d& position, double yaw, double pitch) const {
  Eigen::Isometry3d body = Eigen::Isometry3d::Identity();
  body.linear() = (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) *
                   Eigen::AngleAxisd(-pitch, Eigen::Vector3d::UnitY()))
                      .toRotationMatrix();
  body.translation() = position;
  return body * body_to_camera;
}

}  // namespace safeteleop
