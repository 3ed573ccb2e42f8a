#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "mtp/env_map.hpp"

namespace mtp {

using Quat = Eigen::Quaterniond;
using MotorCommand = Eigen::Vector4d;  // single rotor thrusts f1..f4, N

struct QuadParams {
  double mass = 0.85;                       // kg
  Vec3 inertia = Vec3(1e-3, 1e-3, 1.7e-3);  // diagonal, kg m^2
  double arm_length = 0.15;                 // m
  double kappa = 0.05;                      // rotor torque constant
  double f_min = 0.0;                       // N
  double f_max = 7.0;                       // N
  double w_max = 15.0;                      // rad/s, per body axis
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);

  /// Magnitude of the largest collective thrust acceleration.
  double maxThrustAccel() const { return 4.0 * f_max / mass; }
  MotorCommand hoverCommand() const {
    return MotorCommand::Constant(mass * gravity.norm() / 4.0);
  }
  /// Throws std::invalid_argument on non-physical values.
  void validate() const;
};

/// p, v in the world frame; q rotates body to world; w is the body rate.
struct QuadState {
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();

  static QuadState hover(const Vec3& p) {
    QuadState x;
    x.p = p;
    return x;
  }
};

struct QuadDerivative {
  Vec3 p_dot;
  Eigen::Vector4d q_dot;  // (w, x, y, z)
  Vec3 v_dot;
  Vec3 w_dot;
};

struct Wrench {
  Vec3 thrust;  // body frame, N
  Vec3 torque;  // body frame, N m
};

/// Collective thrust and body torque of an X-configuration rotor set.
Wrench mix(const MotorCommand& f, const QuadParams& params);

QuadDerivative dynamics(const QuadState& x, const MotorCommand& f, const QuadParams& params);

/// Classical RK4 with the input held over the step; the quaternion is
/// renormalized afterwards.
QuadState rk4Step(const QuadState& x, const MotorCommand& f, double dt, const QuadParams& params);

/// Rotor thrusts within [f_min, f_max] and every body rate within
/// [-w_max, w_max], bounds inclusive.
bool checkLimits(const MotorCommand& f, const Vec3& w, const QuadParams& params);

/// Motor-box vertex maximizing the angular acceleration about a body axis
/// (rotors with zero gain take f_min).
MotorCommand maxTorqueCommand(const Vec3& axis, const QuadParams& params);

/// Largest axis . J^-1 tau(f) over the motor box, rad/s^2.
double maxAngularAccel(const Vec3& axis, const QuadParams& params);

/// Inputs rotating purely about a body axis: angular acceleration exactly
/// along +axis (accel) or -axis (decel) with the largest magnitude the motor
/// box allows, and the torque-free input with the same collective thrust.
struct AxisTorqueInput {
  double alpha = 0.0;  // rad/s^2
  MotorCommand accel = MotorCommand::Zero();
  MotorCommand decel = MotorCommand::Zero();
  MotorCommand coast = MotorCommand::Zero();
};
AxisTorqueInput pureAxisTorque(const Vec3& axis, const QuadParams& params);

/// Rotation angle between two attitudes, rad in [0, pi].
double attitudeDistance(const Quat& a, const Quat& b);

}  // namespace mtp
