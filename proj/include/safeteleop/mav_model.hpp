#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "safeteleop/common.hpp"

namespace safeteleop {

/// Closed-loop position dynamics at the filter rate:
///   x[k+1] = A x[k] + B u[k] + w[k],   |w[k]| <= noise_bound.
template <typename Scalar>
struct ClosedLoopModel {
  Mat3<Scalar> A = Mat3<Scalar>::Zero();
  Mat3<Scalar> B = Mat3<Scalar>::Identity();
  Scalar noise_bound = 0;
  Scalar step_dt = Scalar(1) / Scalar(6);

  static ClosedLoopModel perfect_tracking() { return {}; }

  /// First-order lag toward the reference: A = (1 - gain) I, B = gain I.
  static ClosedLoopModel lag(Scalar gain = Scalar(0.5)) {
    ClosedLoopModel m;
    m.A = (Scalar(1) - gain) * Mat3<Scalar>::Identity();
    m.B = gain * Mat3<Scalar>::Identity();
    return m;
  }

  Scalar spectral_radius() const {
    return Eigen::EigenSolver<Mat3<Scalar>>(A, false).eigenvalues().cwiseAbs().maxCoeff();
  }

  void validate() const {
    if (!A.allFinite() || !B.allFinite()) throw std::invalid_argument("model matrices must be finite");
    if (!(spectral_radius() < Scalar(1))) throw std::invalid_argument("closed-loop A must have spectral radius < 1");
    if (!(noise_bound >= Scalar(0))) throw std::invalid_argument("noise bound must be non-negative");
    if (!(step_dt > Scalar(0))) throw std::invalid_argument("step_dt must be positive");
  }
};

template <typename Scalar>
struct MavState {
  Vec3<Scalar> position = Vec3<Scalar>::Zero();
  std::int64_t k = 0;
};

/// Noise-free part of the model.
template <typename Scalar>
Vec3<Scalar> predict(const ClosedLoopModel<Scalar>& model, const Vec3<Scalar>& x, const Vec3<Scalar>& u) {
  return model.A * x + model.B * u;
}

/// Uniform sample from the closed ball of the given radius.
template <typename Scalar, typename Rng>
Vec3<Scalar> sample_ball(Rng& rng, Scalar radius) {
  if (radius <= Scalar(0)) return Vec3<Scalar>::Zero();
  std::normal_distribution<Scalar> normal(0, 1);
  std::uniform_real_distribution<Scalar> uniform(0, 1);
  Vec3<Scalar> dir;
  do {
    dir = Vec3<Scalar>(normal(rng), normal(rng), normal(rng));
  } while (dir.squaredNorm() < Scalar(1e-24));
  dir.normalize();
  return dir * (radius * std::cbrt(uniform(rng)));
}

/// The simulated vehicle: the model plus the noise stream it owns.
template <typename Scalar>
class ClosedLoopPlant {
 public:
  ClosedLoopPlant(ClosedLoopModel<Scalar> model, std::uint64_t seed) : model_(std::move(model)), rng_(seed) {
    model_.validate();
  }

  const ClosedLoopModel<Scalar>& model() const { return model_; }

  MavState<Scalar> step(const MavState<Scalar>& state, const Vec3<Scalar>& u) {
    if (!u.allFinite() || !state.position.allFinite()) throw std::invalid_argument("non-finite state or reference");
    MavState<Scalar> next;
    next.position = predict(model_, state.position, u) + sample_ball<Scalar>(rng_, model_.noise_bound);
    next.k = state.k + 1;
    return next;
  }

 private:
  ClosedLoopModel<Scalar> model_;
  std::mt19937_64 rng_;
};

/// Position feedback with zero-mean Gaussian error, clipped to 3 sigma in norm.
template <typename Scalar>
class StateEstimator {
 public:
  StateEstimator(Scalar sigma, std::uint64_t seed) : sigma_(sigma), rng_(seed) {
    if (!(sigma >= Scalar(0))) throw std::invalid_argument("estimation sigma must be non-negative");
  }

  Vec3<Scalar> estimate(const MavState<Scalar>& state) {
    if (sigma_ == Scalar(0)) return state.position;
    std::normal_distribution<Scalar> normal(0, sigma_);
    Vec3<Scalar> e(normal(rng_), normal(rng_), normal(rng_));
    const Scalar bound = Scalar(3) * sigma_;
    if (e.norm() > bound) e *= bound / e.norm();
    return state.position + e;
  }

 private:
  Scalar sigma_;
  std::mt19937_64 rng_;
};

}  // namespace safeteleop
