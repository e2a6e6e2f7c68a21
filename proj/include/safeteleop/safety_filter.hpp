#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/LU>

#include "safeteleop/common.hpp"
#include "safeteleop/mav_model.hpp"
#include "safeteleop/tesdf.hpp"

namespace safeteleop {

template <typename Scalar>
struct FilterParams {
  Scalar p1 = Scalar(0.45);   // decay rate allowed while safe
  Scalar p2 = Scalar(1e-3);   // recovery rate required while unsafe
  Scalar epsilon = Scalar(0.1);
  Scalar robot_radius = Scalar(0.3);
  Scalar grad_epsilon = Scalar(1e-6);

  void validate() const {
    if (!(p1 > Scalar(0) && p1 <= Scalar(1))) throw std::invalid_argument("p1 must lie in (0, 1]");
    if (!(p2 > Scalar(0))) throw std::invalid_argument("p2 must be positive");
    if (!(epsilon >= Scalar(0))) throw std::invalid_argument("epsilon must be non-negative");
    if (!(robot_radius >= Scalar(0))) throw std::invalid_argument("robot_radius must be non-negative");
    if (!(grad_epsilon > Scalar(0))) throw std::invalid_argument("grad_epsilon must be positive");
  }
};

/// Linearized robust barrier condition on the reference: C u >= c1 + c2.
template <typename Scalar>
struct CbfConstraint {
  RowVec3<Scalar> C = RowVec3<Scalar>::Zero();
  Scalar c1 = 0;
  Scalar c2 = 0;
  Scalar alpha = 0;
  Scalar h_eff = 0;
  Vec3<Scalar> gradient = Vec3<Scalar>::Zero();
  // Linearization point; also the hold-position fallback.
  Vec3<Scalar> state = Vec3<Scalar>::Zero();
  bool degraded = false;

  Scalar bound() const { return c1 + c2; }
};

enum class FilterStatus { PassThrough, Projected, DegenerateGradient, Infeasible };

inline const char* to_string(FilterStatus s) {
  switch (s) {
    case FilterStatus::PassThrough: return "PassThrough";
    case FilterStatus::Projected: return "Projected";
    case FilterStatus::DegenerateGradient: return "DegenerateGradient";
    case FilterStatus::Infeasible: return "Infeasible";
  }
  return "?";
}

template <typename Scalar>
struct FilterResult {
  Vec3<Scalar> u_filtered = Vec3<Scalar>::Zero();
  Vec3<Scalar> correction = Vec3<Scalar>::Zero();
  FilterStatus status = FilterStatus::PassThrough;
};

/// alpha = -p1 on the safe side (h_eff >= 0), +p2 otherwise.
template <typename Scalar>
Scalar decay_rate(Scalar h_eff, const FilterParams<Scalar>& params) {
  return h_eff >= Scalar(0) ? -params.p1 : params.p2;
}

/// Assembles the constraint from a barrier value and gradient at x. The
/// barrier is offset by the robot radius before use.
template <typename Scalar>
CbfConstraint<Scalar> make_constraint(const Vec3<Scalar>& x, Scalar h, const Vec3<Scalar>& grad,
                                      const ClosedLoopModel<Scalar>& model, const FilterParams<Scalar>& params,
                                      bool degraded = false) {
  CbfConstraint<Scalar> c;
  c.state = x;
  c.gradient = grad;
  c.degraded = degraded;
  c.h_eff = h - params.robot_radius;
  c.alpha = decay_rate(c.h_eff, params);
  c.C = grad.transpose() * model.B;
  c.c1 = grad.dot((Mat3<Scalar>::Identity() - model.A) * x) + c.alpha * c.h_eff;
  c.c2 = grad.norm() * params.epsilon;
  return c;
}

inline CbfConstraint<double> build_constraint(const Eigen::Vector3d& x_est, const TesdfField& field,
                                              const ClosedLoopModel<double>& model, const FilterParams<double>& params) {
  const TesdfQuery q = query(field, x_est);
  return make_constraint<double>(x_est, q.value, q.gradient, model, params, q.degraded);
}

/// Closed-form minimizer of |u - u_teleop|^2 subject to C u >= c1 + c2.
/// With a vanishing C the constraint is either vacuous (pass through) or
/// unsatisfiable, in which case the vehicle holds its linearization point.
template <typename Scalar>
FilterResult<Scalar> filter(const Vec3<Scalar>& u_teleop, const CbfConstraint<Scalar>& constraint,
                            const FilterParams<Scalar>& params) {
  if (!u_teleop.allFinite() || !constraint.C.allFinite() || !std::isfinite(constraint.c1) ||
      !std::isfinite(constraint.c2) || !constraint.state.allFinite())
    throw std::invalid_argument("non-finite filter input");

  FilterResult<Scalar> r;
  const Scalar bound = constraint.bound();
  const Scalar norm_sq = constraint.C.squaredNorm();
  auto hold = [&](FilterStatus s) {
    r.u_filtered = constraint.state;
    r.status = s;
  };

  if (std::sqrt(norm_sq) < params.grad_epsilon) {
    if (constraint.degraded) {
      hold(FilterStatus::DegenerateGradient);
    } else if (bound <= Scalar(0)) {
      r.u_filtered = u_teleop;
      r.status = FilterStatus::PassThrough;
    } else {
      hold(FilterStatus::Infeasible);
    }
  } else {
    const Scalar slack = constraint.C.dot(u_teleop) - bound;
    if (slack >= Scalar(0)) {
      r.u_filtered = u_teleop;
      r.status = FilterStatus::PassThrough;
    } else {
      r.u_filtered = u_teleop + (-slack / norm_sq) * constraint.C.transpose();
      r.status = FilterStatus::Projected;
    }
  }
  r.correction = r.u_filtered - u_teleop;
  return r;
}

/// Reference solution by active-set enumeration: the unconstrained minimizer
/// if feasible, otherwise the KKT point of the active constraint solved as a
/// dense linear system. Meant for tests.
template <typename Scalar>
Vec3<Scalar> filter_qp_oracle(const Vec3<Scalar>& u_teleop, const CbfConstraint<Scalar>& constraint) {
  const Scalar bound = constraint.bound();
  if (constraint.C.dot(u_teleop) >= bound) return u_teleop;

  // [2I  -C^T] [u     ]   [2 u_teleop]
  // [C    0  ] [lambda] = [bound     ]
  Eigen::Matrix<Scalar, 4, 4> kkt = Eigen::Matrix<Scalar, 4, 4>::Zero();
  kkt.template topLeftCorner<3, 3>() = Scalar(2) * Mat3<Scalar>::Identity();
  kkt.template topRightCorner<3, 1>() = -constraint.C.transpose();
  kkt.template bottomLeftCorner<1, 3>() = constraint.C;
  Eigen::Matrix<Scalar, 4, 1> rhs;
  rhs << Scalar(2) * u_teleop, bound;
  const Eigen::FullPivLU<Eigen::Matrix<Scalar, 4, 4>> lu(kkt);
  if (!lu.isInvertible()) throw std::domain_error("oracle: constraint is degenerate and infeasible");
  const Eigen::Matrix<Scalar, 4, 1> sol = lu.solve(rhs);
  if (sol[3] < Scalar(0)) throw std::domain_error("oracle: negative multiplier at active point");
  return sol.template head<3>();
}

}  // namespace safeteleop
