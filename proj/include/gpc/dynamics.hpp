#pragma once

// Differential-drive robot in manipulator form
//
//   M(q) q'' + B(q, q') - C(q)^T lambda = T
//
// with generalized coordinates q = [x, y, theta, phi1, phi2] (phi1 right wheel,
// phi2 left wheel) and the three velocity constraints C(q) q' = 0 (rolling,
// lateral no-slip, heading/wheel coupling).

#include <Eigen/Dense>

#include <cmath>

#include "gpc/errors.hpp"

namespace gpc {

template <typename Scalar>
using Vector5 = Eigen::Matrix<Scalar, 5, 1>;
template <typename Scalar>
using Matrix5 = Eigen::Matrix<Scalar, 5, 5>;
template <typename Scalar>
using ConstraintMatrix = Eigen::Matrix<Scalar, 3, 5>;

struct RobotParams {
  double chassis_mass = 10.0;         // m_B [kg]
  double wheel_mass = 1.0;            // m_w [kg]
  double total_mass = 12.0;           // m_T = m_B + 2 m_w [kg]
  double chassis_offset = 0.1;        // d: axle center to chassis COM [m]
  double wheel_radius = 0.05;         // rho [m]
  double half_track = 0.2;            // W [m]
  double chassis_yaw_inertia = 0.4;   // I^B [kg m^2], not used by M(q)
  double total_yaw_inertia = 0.5;     // I_T [kg m^2]
  double wheel_spin_inertia = 0.005;  // I_yy^B [kg m^2]

  /// Throws ConfigError when a mass, length or inertia is non-positive or
  /// the total mass does not match chassis + two wheels.
  void validate() const;
};

inline void RobotParams::validate() const {
  const double values[] = {chassis_mass, wheel_mass, total_mass, chassis_offset, wheel_radius,
                           half_track, chassis_yaw_inertia, total_yaw_inertia, wheel_spin_inertia};
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("robot parameters must be finite and strictly positive");
    }
  }
  if (std::abs(total_mass - (chassis_mass + 2.0 * wheel_mass)) > 1e-12) {
    throw ConfigError("totalMass must equal chassisMass + 2 * wheelMass");
  }
}

template <typename Scalar>
struct GeneralizedState {
  Vector5<Scalar> q = Vector5<Scalar>::Zero();
  Vector5<Scalar> qdot = Vector5<Scalar>::Zero();
};

template <typename Scalar>
struct WheelTorques {
  Scalar right = Scalar(0);
  Scalar left = Scalar(0);
};

using State = GeneralizedState<double>;
using Torques = WheelTorques<double>;

template <typename Scalar>
Matrix5<Scalar> massMatrix(const Vector5<Scalar>& q, const RobotParams& p) {
  using std::cos;
  using std::sin;
  const Scalar coupling = Scalar(p.chassis_mass * p.chassis_offset);
  const Scalar s = sin(q(2));
  const Scalar c = cos(q(2));
  Matrix5<Scalar> m = Matrix5<Scalar>::Zero();
  m(0, 0) = Scalar(p.total_mass);
  m(1, 1) = Scalar(p.total_mass);
  m(0, 2) = m(2, 0) = -coupling * s;
  m(1, 2) = m(2, 1) = coupling * c;
  m(2, 2) = Scalar(p.total_yaw_inertia);
  m(3, 3) = Scalar(p.wheel_spin_inertia);
  m(4, 4) = Scalar(p.wheel_spin_inertia);
  return m;
}

template <typename Scalar>
Vector5<Scalar> coriolisVector(const Vector5<Scalar>& q, const Vector5<Scalar>& qdot,
                               const RobotParams& p) {
  using std::cos;
  using std::sin;
  const Scalar factor = -Scalar(p.chassis_mass * p.chassis_offset) * qdot(2) * qdot(2);
  Vector5<Scalar> b = Vector5<Scalar>::Zero();
  b(0) = factor * cos(q(2));
  b(1) = factor * sin(q(2));
  return b;
}

template <typename Scalar>
ConstraintMatrix<Scalar> constraintMatrix(const Vector5<Scalar>& q, const RobotParams& p) {
  using std::cos;
  using std::sin;
  const Scalar s = sin(q(2));
  const Scalar c = cos(q(2));
  const Scalar half_rho = Scalar(0.5 * p.wheel_radius);
  const Scalar coupling = Scalar(p.wheel_radius / (2.0 * p.half_track));
  ConstraintMatrix<Scalar> m;
  m << c, s, Scalar(0), half_rho, -half_rho,
      -s, c, Scalar(0), Scalar(0), Scalar(0),
      Scalar(0), Scalar(0), Scalar(1), coupling, coupling;
  return m;
}

/// Time derivative of C(q) along qdot; only the heading-dependent entries move.
template <typename Scalar>
ConstraintMatrix<Scalar> constraintMatrixRate(const Vector5<Scalar>& q,
                                              const Vector5<Scalar>& qdot) {
  using std::cos;
  using std::sin;
  const Scalar s = sin(q(2));
  const Scalar c = cos(q(2));
  const Scalar w = qdot(2);
  ConstraintMatrix<Scalar> m = ConstraintMatrix<Scalar>::Zero();
  m(0, 0) = -s * w;
  m(0, 1) = c * w;
  m(1, 0) = -c * w;
  m(1, 1) = -s * w;
  return m;
}

/// Generalized force vector for the wheel torques. A positive torque on
/// either wheel drives the robot forward: with the rolling row of C(q) the
/// forward speed is rho/2 (phi2' - phi1'), so the right-wheel torque enters
/// the phi1 equation with a negative sign.
template <typename Scalar>
Vector5<Scalar> generalizedForce(const WheelTorques<Scalar>& tau) {
  Vector5<Scalar> t = Vector5<Scalar>::Zero();
  t(3) = -tau.right;
  t(4) = tau.left;
  return t;
}

inline constexpr double kMinConstraintRcond = 1e-12;

/// Inverse of M(q), exploiting its block structure (planar 3x3 block plus
/// the two decoupled wheel inertias).
template <typename Scalar>
Matrix5<Scalar> inverseMassMatrix(const Vector5<Scalar>& q, const RobotParams& p) {
  const Matrix5<Scalar> m = massMatrix(q, p);
  Matrix5<Scalar> inv = Matrix5<Scalar>::Zero();
  inv.template topLeftCorner<3, 3>() = m.template topLeftCorner<3, 3>().inverse();
  inv(3, 3) = Scalar(1) / m(3, 3);
  inv(4, 4) = Scalar(1) / m(4, 4);
  return inv;
}

namespace detail {

// Returns q'' and writes lambda; shared by acceleration() and constraintForces().
template <typename Scalar>
Vector5<Scalar> constrainedAcceleration(const Vector5<Scalar>& q, const Vector5<Scalar>& qdot,
                                        const Vector5<Scalar>& torques5, const RobotParams& p,
                                        Eigen::Matrix<Scalar, 3, 1>& lambda) {
  const Matrix5<Scalar> minv = inverseMassMatrix(q, p);
  const ConstraintMatrix<Scalar> c = constraintMatrix(q, p);
  const Eigen::Matrix<Scalar, 5, 3> minv_ct = minv * c.transpose();
  const Eigen::Matrix<Scalar, 3, 3> schur = c * minv_ct;
  const Eigen::Matrix<Scalar, 3, 3> schur_inv = schur.inverse();
  // Reciprocal condition number in the 1-norm.
  const Scalar rcond = Scalar(1) / (schur.cwiseAbs().colwise().sum().maxCoeff() *
                                    schur_inv.cwiseAbs().colwise().sum().maxCoeff());
  if (!(rcond >= Scalar(kMinConstraintRcond))) {
    throw SingularConstraintSystem("constraint system C M^-1 C^T is numerically singular");
  }
  const Vector5<Scalar> free_force = torques5 - coriolisVector(q, qdot, p);
  const Vector5<Scalar> free_acc = minv * free_force;
  lambda = -schur_inv * (c * free_acc + constraintMatrixRate(q, qdot) * qdot);
  return free_acc + minv_ct * lambda;
}

}  // namespace detail

/// Constraint forces
///   lambda = -[C M^-1 C^T]^-1 [C M^-1 (T - B) + C' q'].
/// Throws SingularConstraintSystem when the 3x3 system has reciprocal
/// condition number below kMinConstraintRcond.
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> constraintForces(const Vector5<Scalar>& q, const Vector5<Scalar>& qdot,
                                             const Vector5<Scalar>& torques5,
                                             const RobotParams& p) {
  Eigen::Matrix<Scalar, 3, 1> lambda;
  detail::constrainedAcceleration(q, qdot, torques5, p, lambda);
  return lambda;
}

/// q'' = M^-1 (T + C^T lambda - B).
template <typename Scalar>
Vector5<Scalar> acceleration(const Vector5<Scalar>& q, const Vector5<Scalar>& qdot,
                             const WheelTorques<Scalar>& tau, const RobotParams& p) {
  Eigen::Matrix<Scalar, 3, 1> lambda;
  return detail::constrainedAcceleration(q, qdot, generalizedForce(tau), p, lambda);
}

/// Removes the component of qdot that violates C(q) qdot = 0.
template <typename Scalar>
Vector5<Scalar> projectVelocity(const Vector5<Scalar>& q, const Vector5<Scalar>& qdot,
                                const RobotParams& p) {
  const ConstraintMatrix<Scalar> c = constraintMatrix(q, p);
  const Eigen::Matrix<Scalar, 3, 3> cct = c * c.transpose();
  return qdot - c.transpose() * (cct.inverse() * (c * qdot));
}

/// Classical RK4 step with the torques held constant, followed by velocity
/// projection onto the constraint manifold.
template <typename Scalar>
GeneralizedState<Scalar> stepRk4(const GeneralizedState<Scalar>& s, const WheelTorques<Scalar>& tau,
                                 Scalar dt, const RobotParams& p) {
  const Scalar half = dt / Scalar(2);
  const Vector5<Scalar> k1q = s.qdot;
  const Vector5<Scalar> k1v = acceleration(s.q, s.qdot, tau, p);
  const Vector5<Scalar> q2 = s.q + half * k1q;
  const Vector5<Scalar> v2 = s.qdot + half * k1v;
  const Vector5<Scalar> k2q = v2;
  const Vector5<Scalar> k2v = acceleration(q2, v2, tau, p);
  const Vector5<Scalar> q3 = s.q + half * k2q;
  const Vector5<Scalar> v3 = s.qdot + half * k2v;
  const Vector5<Scalar> k3q = v3;
  const Vector5<Scalar> k3v = acceleration(q3, v3, tau, p);
  const Vector5<Scalar> q4 = s.q + dt * k3q;
  const Vector5<Scalar> v4 = s.qdot + dt * k3v;
  const Vector5<Scalar> k4q = v4;
  const Vector5<Scalar> k4v = acceleration(q4, v4, tau, p);

  GeneralizedState<Scalar> next;
  next.q = s.q + (dt / Scalar(6)) * (k1q + Scalar(2) * k2q + Scalar(2) * k3q + k4q);
  next.qdot = s.qdot + (dt / Scalar(6)) * (k1v + Scalar(2) * k2v + Scalar(2) * k3v + k4v);
  next.qdot = projectVelocity(next.q, next.qdot, p);
  return next;
}

template <typename Scalar>
Scalar kineticEnergy(const GeneralizedState<Scalar>& s, const RobotParams& p) {
  return Scalar(0.5) * s.qdot.dot(massMatrix(s.q, p) * s.qdot);
}

/// Generalized velocity consistent with the constraints for the given
/// right/left wheel rates (in the robot's forward sense) and heading.
template <typename Scalar>
Vector5<Scalar> velocityFromWheelRates(Scalar theta, Scalar right_rate, Scalar left_rate,
                                       const RobotParams& p) {
  using std::cos;
  using std::sin;
  const Scalar rho = Scalar(p.wheel_radius);
  const Scalar forward = rho * (right_rate + left_rate) / Scalar(2);
  const Scalar yaw_rate = rho * (right_rate - left_rate) / Scalar(2 * p.half_track);
  Vector5<Scalar> v;
  v << forward * cos(theta), forward * sin(theta), yaw_rate, -right_rate, left_rate;
  return v;
}

/// Same as velocityFromWheelRates, parameterized by body speeds.
template <typename Scalar>
Vector5<Scalar> velocityFromBodyRates(Scalar theta, Scalar forward, Scalar yaw_rate,
                                      const RobotParams& p) {
  const Scalar rho = Scalar(p.wheel_radius);
  const Scalar w = Scalar(p.half_track);
  const Scalar right = (forward + w * yaw_rate) / rho;
  const Scalar left = (forward - w * yaw_rate) / rho;
  return velocityFromWheelRates(theta, right, left, p);
}

}  // namespace gpc
