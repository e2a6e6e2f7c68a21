#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace safeteleop {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
using RowVec3 = Eigen::Matrix<Scalar, 1, 3>;

enum class Axis { X = 0, Y = 1, Z = 2 };

}  // namespace safeteleop
