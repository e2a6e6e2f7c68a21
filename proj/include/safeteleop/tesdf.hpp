#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "safeteleop/common.hpp"
#include "safeteleop/grid_map.hpp"

namespace safeteleop {

/// Truncated Euclidean signed distance to the boundary of free space, sampled
/// at voxel centers: positive in free space, negative in occupied and unknown
/// space, clamped to [-truncation, truncation]. Immutable once built.
class TesdfField {
 public:
  TesdfField(GridGeometry geometry, double truncation, std::vector<double> values);

  const GridGeometry& geometry() const { return geometry_; }
  double truncation() const { return truncation_; }
  std::span<const double> values() const { return values_; }
  double at(const Eigen::Vector3i& v) const { return values_[geometry_.index(v)]; }

 private:
  GridGeometry geometry_;
  double truncation_;
  std::vector<double> values_;
};

struct TesdfQuery {
  double value = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  // Point too close to (or outside) the volume edge for the gradient stencil;
  // the query was evaluated at the clamped location.
  bool degraded = false;
};

/// Exact within the truncation band: the distance from a voxel center to the
/// nearest voxel of the opposite class is separable per axis, so it is
/// computed by three 1-D lower-envelope sweeps. The volume boundary counts as
/// non-free.
TesdfField build_tesdf(const GridSnapshot& snapshot, double truncation);

/// Reference field by exhaustive search over every boundary face. Meant for
/// tests; throws std::length_error above 64^3 voxels.
TesdfField brute_force_esdf(const GridSnapshot& snapshot, double truncation);

/// Trilinear interpolation of voxel-center values, clamped to the volume.
double interpolate(const TesdfField& field, const Eigen::Vector3d& x);

/// Central differences of the interpolated field with half-width `step`.
Eigen::Vector3d central_gradient(const TesdfField& field, const Eigen::Vector3d& x, double step);

struct OneSidedGradients {
  Eigen::Vector3d forward;
  Eigen::Vector3d backward;
};
OneSidedGradients one_sided_gradients(const TesdfField& field, const Eigen::Vector3d& x, double step);

/// Value plus central-difference gradient (half-width resolution / 2). The
/// gradient is zero on the truncation plateau.
TesdfQuery query(const TesdfField& field, const Eigen::Vector3d& x);

/// Fixed-axis slice through the voxel layer containing `coord`.
/// axis Z: rows = y, cols = x; axis Y: rows = z, cols = x; axis X: rows = z, cols = y.
/// Throws std::out_of_range when coord lies outside the volume.
Eigen::MatrixXd slice(const TesdfField& field, Axis axis, double coord);

void write_slice_csv(std::ostream& os, const Eigen::MatrixXd& values);

}  // namespace safeteleop
