#include <doctest.h>

#include <cmath>
#include <random>

#include "mtp/quad_model.hpp"

using namespace mtp;

namespace {

QuadState integrate(QuadState x, const MotorCommand& f, double t_end, double dt,
                    const QuadParams& params) {
  const int n = static_cast<int>(std::lround(t_end / dt));
  for (int i = 0; i < n; ++i) x = rk4Step(x, f, dt, params);
  return x;
}

double stateError(const QuadState& a, const QuadState& b) {
  return (a.p - b.p).norm() + (a.v - b.v).norm() + (a.w - b.w).norm() +
         attitudeDistance(a.q, b.q);
}

QuadState tumbling() {
  QuadState x;
  x.p = Vec3(1, 2, 3);
  x.q = Quat(Eigen::AngleAxisd(0.7, Vec3(1, 2, -1).normalized()));
  x.v = Vec3(2, -1, 0.5);
  x.w = Vec3(3, -2, 5);
  return x;
}

}  // namespace

TEST_CASE("mixer") {
  const QuadParams params;
  const auto hover = mix(params.hoverCommand(), params);
  CHECK(params.hoverCommand()[0] == doctest::Approx(2.0846).epsilon(1e-4));
  CHECK(hover.thrust.z() == doctest::Approx(8.3385));
  CHECK(hover.torque.norm() < 1e-12);

  const auto single = mix(MotorCommand(7, 0, 0, 0), params);
  CHECK(single.torque.x() == doctest::Approx(0.15 / std::sqrt(2.0) * 7));
  CHECK(single.torque.y() == doctest::Approx(-0.15 / std::sqrt(2.0) * 7));
  CHECK(single.torque.z() == doctest::Approx(0.35));
  CHECK(single.torque.x() == doctest::Approx(0.7425).epsilon(1e-4));

  const auto zero = mix(MotorCommand::Zero(), params);
  CHECK(zero.thrust.norm() == 0.0);
  CHECK(zero.torque.norm() == 0.0);
}

TEST_CASE("dynamics examples") {
  const QuadParams params;
  const auto h = dynamics(QuadState::hover(Vec3(1, 1, 1)), params.hoverCommand(), params);
  CHECK(h.p_dot.norm() == 0.0);
  CHECK(h.v_dot.norm() < 1e-12);
  CHECK(h.w_dot.norm() < 1e-12);
  CHECK(h.q_dot.norm() == 0.0);

  const auto full = dynamics(QuadState{}, MotorCommand::Constant(7.0), params);
  CHECK(full.v_dot.z() == doctest::Approx(28.0 / 0.85 - 9.81));
  CHECK(full.v_dot.z() == doctest::Approx(23.13).epsilon(1e-3));

  QuadState spin;
  spin.w = Vec3(1, 0, 0);
  const auto s = dynamics(spin, params.hoverCommand(), params);
  CHECK(s.w_dot.norm() < 1e-12);
  // quaternion rate of a pure x spin
  CHECK(s.q_dot[1] == doctest::Approx(0.5));
}

TEST_CASE("rk4 fixed point and free fall") {
  const QuadParams params;
  const auto x0 = QuadState::hover(Vec3(0, 0, 2));
  const auto x1 = integrate(x0, params.hoverCommand(), 1.0, 0.01, params);
  CHECK((x1.p - x0.p).norm() < 1e-12);
  CHECK(x1.v.norm() < 1e-12);

  const auto fall = rk4Step(x0, MotorCommand::Zero(), 0.1, params);
  CHECK(fall.v.z() == doctest::Approx(-0.981).epsilon(1e-12));
  CHECK(x0.p.z() - fall.p.z() == doctest::Approx(0.04905).epsilon(1e-12));
}

TEST_CASE("rk4 converges with fourth order") {
  const QuadParams params;
  const MotorCommand f(3.0, 1.0, 2.0, 0.5);
  const auto ref = integrate(tumbling(), f, 0.5, 1e-5, params);
  double prev = 0.0;
  for (double dt : {0.02, 0.01, 0.005}) {
    const double e = stateError(integrate(tumbling(), f, 0.5, dt, params), ref);
    if (prev > 0.0) CHECK(std::log2(prev / e) >= 3.8);
    prev = e;
  }
}

TEST_CASE("quaternion norm is preserved") {
  const QuadParams params;
  QuadState x = tumbling();
  const MotorCommand f(3.0, 1.0, 2.0, 0.5);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    x = rk4Step(x, f, 1e-4, params);
    worst = std::max(worst, std::abs(x.q.norm() - 1.0));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("ballistic energy is conserved") {
  const QuadParams params;
  QuadState x;
  x.v = Vec3(3, -1, 4);
  auto energy = [&](const QuadState& s) {
    return 0.5 * params.mass * s.v.squaredNorm() - params.mass * params.gravity.dot(s.p);
  };
  const double e0 = energy(x);
  x = integrate(x, MotorCommand::Zero(), 2.0, 0.01, params);
  CHECK(energy(x) == doctest::Approx(e0).epsilon(1e-10));
}

TEST_CASE("dynamics are yaw equivariant") {
  const QuadParams params;
  const MotorCommand f(3.0, 1.0, 2.0, 0.5);
  const QuadState x = tumbling();
  const Quat yaw(Eigen::AngleAxisd(1.1, Vec3::UnitZ()));
  QuadState y = x;
  y.p = yaw * x.p;
  y.v = yaw * x.v;
  y.q = yaw * x.q;
  const auto dx = dynamics(x, f, params);
  const auto dy = dynamics(y, f, params);
  CHECK((dy.p_dot - yaw * dx.p_dot).norm() < 1e-12);
  CHECK((dy.v_dot - yaw * dx.v_dot).norm() < 1e-12);
  CHECK((dy.w_dot - dx.w_dot).norm() < 1e-9);
}

TEST_CASE("limit checks are inclusive") {
  const QuadParams params;
  CHECK(checkLimits(params.hoverCommand(), Vec3::Zero(), params));
  CHECK_FALSE(checkLimits(MotorCommand(7.01, 0, 0, 0), Vec3::Zero(), params));
  CHECK(checkLimits(MotorCommand(7, 0, 0, 0), Vec3::Zero(), params));
  CHECK(checkLimits(params.hoverCommand(), Vec3(0, 0, 15.0), params));
  CHECK_FALSE(checkLimits(params.hoverCommand(), Vec3(0, -15.01, 0), params));
  CHECK_FALSE(checkLimits(MotorCommand(-0.1, 1, 1, 1), Vec3::Zero(), params));
}

TEST_CASE("maximal angular acceleration") {
  const QuadParams params;
  CHECK(maxAngularAccel(Vec3::UnitX(), params) ==
        doctest::Approx(0.15 / std::sqrt(2.0) * 14.0 / 1e-3));
  CHECK(maxAngularAccel(Vec3::UnitX(), params) == doctest::Approx(1484.9).epsilon(1e-4));
  CHECK(maxAngularAccel(-Vec3::UnitX(), params) ==
        doctest::Approx(maxAngularAccel(Vec3::UnitX(), params)));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = trial == 0 ? M_PI / 4.0 : ang(rng);
    const Vec3 axis(std::cos(a), std::sin(a), 0.0);
    double best = -INFINITY;
    for (int m = 0; m < 16; ++m) {
      MotorCommand f;
      for (int i = 0; i < 4; ++i) f[i] = (m >> i) & 1 ? params.f_max : params.f_min;
      const Vec3 alpha = mix(f, params).torque.cwiseQuotient(params.inertia);
      best = std::max(best, axis.dot(alpha));
    }
    CHECK(maxAngularAccel(axis, params) == doctest::Approx(best).epsilon(1e-12));
    const MotorCommand f = maxTorqueCommand(axis, params);
    const Vec3 tau = mix(f, params).torque;
    CHECK(std::abs(tau.z()) < 1e-12);  // no yaw torque from the bang inputs
  }
}

TEST_CASE("parameter validation") {
  QuadParams p;
  CHECK_NOTHROW(p.validate());
  p.f_max = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
