#include "mtp/quad_model.hpp"

#include <cmath>
#include <stdexcept>

namespace mtp {

namespace {

Eigen::Vector4d quatCoeffs(const Quat& q) { return Eigen::Vector4d(q.w(), q.x(), q.y(), q.z()); }

// Rate of change of (w,x,y,z) for q ⊙ (0, w).
Eigen::Vector4d quatRate(const Eigen::Vector4d& q, const Vec3& w) {
  return 0.5 * Eigen::Vector4d(-q[1] * w[0] - q[2] * w[1] - q[3] * w[2],
                               q[0] * w[0] + q[2] * w[2] - q[3] * w[1],
                               q[0] * w[1] + q[3] * w[0] - q[1] * w[2],
                               q[0] * w[2] + q[1] * w[1] - q[2] * w[0]);
}

// Per-rotor gain of axis . J^-1 tau.
Eigen::Vector4d torqueGains(const Vec3& axis, const QuadParams& params) {
  const double k = params.arm_length / std::sqrt(2.0);
  const double ax = axis.x() / params.inertia.x();
  const double ay = axis.y() / params.inertia.y();
  const double az = axis.z() / params.inertia.z();
  return Eigen::Vector4d(k * (ax - ay) + params.kappa * az, k * (-ax - ay) - params.kappa * az,
                         k * (-ax + ay) + params.kappa * az, k * (ax + ay) - params.kappa * az);
}

struct Flat {
  Vec3 p;
  Eigen::Vector4d q;
  Vec3 v;
  Vec3 w;
};

Flat derivative(const Flat& x, const MotorCommand& f, const QuadParams& params) {
  const Wrench u = mix(f, params);
  const Quat q(x.q[0], x.q[1], x.q[2], x.q[3]);
  const Vec3 Jw = params.inertia.cwiseProduct(x.w);
  return Flat{x.v, quatRate(x.q, x.w), q.normalized() * u.thrust / params.mass + params.gravity,
              (u.torque - x.w.cross(Jw)).cwiseQuotient(params.inertia)};
}

Flat axpy(const Flat& x, double h, const Flat& d) {
  return Flat{x.p + h * d.p, x.q + h * d.q, x.v + h * d.v, x.w + h * d.w};
}

}  // namespace

void QuadParams::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(inertia.minCoeff() > 0.0)) throw std::invalid_argument("inertia must be positive");
  if (!(arm_length > 0.0)) throw std::invalid_argument("arm length must be positive");
  if (!(f_min < f_max) || f_min < 0.0) throw std::invalid_argument("need 0 <= f_min < f_max");
  if (!(w_max > 0.0)) throw std::invalid_argument("w_max must be positive");
  if (!gravity.allFinite()) throw std::invalid_argument("gravity must be finite");
}

Wrench mix(const MotorCommand& f, const QuadParams& params) {
  const double k = params.arm_length / std::sqrt(2.0);
  return Wrench{Vec3(0.0, 0.0, f.sum()),
                Vec3(k * (f[0] - f[1] - f[2] + f[3]), k * (-f[0] - f[1] + f[2] + f[3]),
                     params.kappa * (f[0] - f[1] + f[2] - f[3]))};
}

QuadDerivative dynamics(const QuadState& x, const MotorCommand& f, const QuadParams& params) {
  const Flat d = derivative(Flat{x.p, quatCoeffs(x.q), x.v, x.w}, f, params);
  return QuadDerivative{d.p, d.q, d.v, d.w};
}

QuadState rk4Step(const QuadState& x, const MotorCommand& f, double dt, const QuadParams& params) {
  const Flat x0{x.p, quatCoeffs(x.q), x.v, x.w};
  const Flat k1 = derivative(x0, f, params);
  const Flat k2 = derivative(axpy(x0, 0.5 * dt, k1), f, params);
  const Flat k3 = derivative(axpy(x0, 0.5 * dt, k2), f, params);
  const Flat k4 = derivative(axpy(x0, dt, k3), f, params);
  const double h = dt / 6.0;
  QuadState out;
  out.p = x0.p + h * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  const Eigen::Vector4d q = x0.q + h * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  out.q = Quat(q[0], q[1], q[2], q[3]).normalized();
  out.v = x0.v + h * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  out.w = x0.w + h * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w);
  return out;
}

bool checkLimits(const MotorCommand& f, const Vec3& w, const QuadParams& params) {
  for (int i = 0; i < 4; ++i)
    if (!(f[i] >= params.f_min && f[i] <= params.f_max)) return false;
  for (int j = 0; j < 3; ++j)
    if (!(std::abs(w[j]) <= params.w_max)) return false;
  return true;
}

MotorCommand maxTorqueCommand(const Vec3& axis, const QuadParams& params) {
  const Eigen::Vector4d g = torqueGains(axis, params);
  MotorCommand f;
  for (int i = 0; i < 4; ++i) f[i] = g[i] > 0.0 ? params.f_max : params.f_min;
  return f;
}

double maxAngularAccel(const Vec3& axis, const QuadParams& params) {
  return torqueGains(axis, params).dot(maxTorqueCommand(axis, params));
}

AxisTorqueInput pureAxisTorque(const Vec3& axis, const QuadParams& params) {
  // tau = M f with M 1 = 0, so every input with torque lambda*J*axis is
  // lambda*f_p + c*1 where f_p is the minimum-norm input for J*axis.
  const double k = params.arm_length / std::sqrt(2.0);
  Eigen::Matrix<double, 3, 4> M;
  M << k, -k, -k, k, -k, -k, k, k, params.kappa, -params.kappa, params.kappa, -params.kappa;
  const Vec3 target = params.inertia.cwiseProduct(axis.normalized());
  const Eigen::Vector4d fp = M.transpose() * (M * M.transpose()).inverse() * target;
  const double span = fp.maxCoeff() - fp.minCoeff();
  AxisTorqueInput out;
  if (!(span > 0.0)) return out;
  out.alpha = (params.f_max - params.f_min) / span;
  out.accel = (out.alpha * fp).array() + (params.f_min - out.alpha * fp.minCoeff());
  out.decel = (-out.alpha * fp).array() + (params.f_min + out.alpha * fp.maxCoeff());
  out.coast = MotorCommand::Constant(0.25 * out.accel.sum());
  return out;
}

double attitudeDistance(const Quat& a, const Quat& b) {
  const double d = std::abs(a.normalized().dot(b.normalized()));
  return 2.0 * std::acos(std::min(1.0, d));
}

}  // namespace mtp
