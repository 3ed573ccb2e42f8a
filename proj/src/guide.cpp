#include "mtp/guide.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mtp {

namespace {

constexpr double kMinAngle = 1e-6;     // rad; smaller attitude changes are ignored
constexpr double kMinDuration = 1e-12;

}  // namespace

RotationProfile RotationProfile::restToRest(const Vec3& axis, double angle, double alpha,
                                            double w_cap, double step) {
  if (!(alpha > 0.0) || !(w_cap > 0.0) || angle < 0.0)
    throw std::invalid_argument("rotation needs alpha > 0, w_cap > 0, angle >= 0");
  RotationProfile r;
  r.axis = axis;
  r.angle = angle;
  r.alpha = alpha;
  r.w_cap = w_cap;
  r.t_a = std::sqrt(angle / alpha);
  if (alpha * r.t_a > w_cap) {
    r.t_a = w_cap / alpha;
    r.t_s = (angle - alpha * r.t_a * r.t_a) / w_cap;
  }
  if (step > 0.0 && angle > 0.0) {
    const double n_a = std::max(1.0, std::ceil(r.t_a / step - 1e-9));
    const double n_s = r.t_s > 0.0 ? std::ceil(r.t_s / step - 1e-9) : 0.0;
    r.t_a = n_a * step;
    r.t_s = n_s * step;
    const double w_peak = angle / (r.t_a + r.t_s);
    r.alpha = w_peak / r.t_a;
  }
  r.t_b = r.t_a;
  return r;
}

double RotationProfile::rateAt(double t) const {
  t = std::clamp(t, 0.0, duration());
  if (t <= t_a) return alpha * t;
  if (t <= t_a + t_s) return alpha * t_a;
  return alpha * (duration() - t);
}

double RotationProfile::angleAt(double t) const {
  t = std::clamp(t, 0.0, duration());
  if (t <= t_a) return 0.5 * alpha * t * t;
  if (t <= t_a + t_s) return 0.5 * alpha * t_a * t_a + alpha * t_a * (t - t_a);
  const double r = duration() - t;
  return angle - 0.5 * alpha * r * r;
}

std::pair<Vec3, double> tiltRotation(const Quat& from, const Vec3& dir) {
  const Vec3 z = from * Vec3::UnitZ();
  const Vec3 d = dir.normalized();
  const double angle = std::atan2(z.cross(d).norm(), z.dot(d));
  Vec3 axis_world = z.cross(d);
  if (axis_world.norm() < 1e-12) axis_world = from * Vec3::UnitX();
  Vec3 axis = from.conjugate() * axis_world.normalized();
  axis.z() = 0.0;
  return {axis.normalized(), angle};
}

std::array<MotorCommand, 3> GuideReference::rotationCommands(const Vec3& axis,
                                                             double coast_thrust,
                                                             double torque_scale,
                                                             const QuadParams& params) {
  const AxisTorqueInput u = pureAxisTorque(axis, params);
  // accel - coast is a pure torque; scaling it keeps the collective thrust
  return {u.coast + torque_scale * (u.accel - u.coast), MotorCommand::Constant(coast_thrust),
          u.coast + torque_scale * (u.decel - u.coast)};
}

void GuideReference::pushRotation(const Quat& from, const Vec3& axis_body, double angle,
                                  const Vec3& p, const Vec3& v) {
  const double alpha = pureAxisTorque(axis_body, params_).alpha;
  const double w_cap = params_.w_max / std::max(std::abs(axis_body.x()), std::abs(axis_body.y()));
  GuideSegment seg;
  seg.rotation = true;
  seg.t_start = duration_;
  seg.q_start = from;
  seg.hold_p = p;
  seg.hold_v = v;
  seg.profile = RotationProfile::restToRest(axis_body, angle, alpha, w_cap, input_step_);
  seg.duration = seg.profile.duration();
  // Coasting thrust that carries the weight at the mid-rotation attitude.
  const Quat mid = (from * Quat(Eigen::AngleAxisd(0.5 * angle, axis_body))).normalized();
  const double c = (mid * Vec3::UnitZ()).z();
  const double coast_thrust =
    c > 1e-3 ? std::clamp(-params_.mass * params_.gravity.z() / (4.0 * c), params_.f_min,
                          params_.f_max)
             : params_.f_min;
  seg.coast_thrust = coast_thrust;
  seg.torque_scale = seg.profile.alpha / alpha;
  const auto cmd = rotationCommands(axis_body, coast_thrust, seg.torque_scale, params_);
  const std::array<double, 3> d{seg.profile.t_a, seg.profile.t_s, seg.profile.t_b};
  const std::array<GuidePhaseKind, 3> kinds{GuidePhaseKind::kRotationAccel,
                                            GuidePhaseKind::kRotationCoast,
                                            GuidePhaseKind::kRotationDecel};
  double t = duration_;
  for (int k = 0; k < 3; ++k) {
    if (d[k] <= kMinDuration) continue;
    phases_.push_back(GuidePhase{kinds[k], t, d[k], cmd[k], segments_.size()});
    t += d[k];
  }
  segments_.push_back(seg);
  duration_ += seg.duration;
  attitude_ = (from * Quat(Eigen::AngleAxisd(angle, axis_body))).normalized();
}

void GuideReference::addRotation(const Quat& from, const Vec3& to_dir, const Vec3& p,
                                 const Vec3& v) {
  const auto [axis, angle] = tiltRotation(from, to_dir);
  if (angle > kMinAngle) pushRotation(from, axis, angle, p, v);
}

double GuideReference::rotationDuration(const Quat& from, const Vec3& to_dir) const {
  const auto [axis, angle] = tiltRotation(from, to_dir);
  if (angle <= kMinAngle) return 0.0;
  const double alpha = pureAxisTorque(axis, params_).alpha;
  const double w_cap = params_.w_max / std::max(std::abs(axis.x()), std::abs(axis.y()));
  return RotationProfile::restToRest(axis, angle, alpha, w_cap, input_step_).duration();
}

GuideReference::GuideReference(const PmmTrajectory& pm, const QuadParams& params,
                               const GuideParams& guide)
    : params_(params), pm_(pm), input_step_(guide.input_step) {
  const double sample_dt = guide.sample_dt;
  if (!(sample_dt > 0.0)) throw std::invalid_argument("guide sample step must be positive");
  if (pm.primitives.empty()) throw std::invalid_argument("empty point-mass trajectory");
  params_.validate();

  // Constant-acceleration slices between the switch times of every axis.
  struct Slice {
    double pm_start;
    double len;
    Vec3 thrust;  // thrust acceleration a - g
  };
  std::vector<Slice> slices;
  double pm_t = 0.0;
  for (const auto& prim : pm_.primitives) {
    std::vector<double> cuts{0.0};
    for (double s : primitiveSwitchTimes(prim)) cuts.push_back(s);
    cuts.push_back(prim.T);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double len = cuts[c + 1] - cuts[c];
      if (len <= kMinDuration) continue;
      const PmSample mid = samplePrimitive(prim, 0.5 * (cuts[c] + cuts[c + 1]));
      slices.push_back(Slice{pm_t + cuts[c], len, mid.a - params_.gravity});
    }
    pm_t += prim.T;
  }
  pm_duration_ = pm_t;

  // Slices too short to be worth a turn join the previous one with the
  // time-weighted mean thrust, which keeps their velocity change.
  std::vector<Slice> merged;
  for (const Slice& sl : slices) {
    if (!merged.empty()) {
      Slice& last = merged.back();
      const Quat along = Quat::FromTwoVectors(Vec3::UnitZ(), last.thrust);
      if (sl.len < guide.min_slice ||
          sl.len < guide.absorb_ratio * rotationDuration(along, sl.thrust)) {
        last.thrust = (last.len * last.thrust + sl.len * sl.thrust) / (last.len + sl.len);
        last.len += sl.len;
        continue;
      }
    }
    merged.push_back(sl);
  }

  for (const Slice& sl : merged) {
    const double f =
      std::clamp(params_.mass * sl.thrust.norm() / 4.0, params_.f_min, params_.f_max);
    const PmSample begin = pm_.sample(sl.pm_start);
    if (sl.thrust.norm() > 1e-9) addRotation(attitude_, sl.thrust, begin.p, begin.v);
    GuideSegment seg;
    seg.t_start = duration_;
    seg.duration = sl.len;
    seg.pm_start = sl.pm_start;
    seg.thrust = sl.thrust;
    seg.q_start = attitude_;
    phases_.push_back(GuidePhase{GuidePhaseKind::kTranslation, duration_, sl.len,
                                 MotorCommand::Constant(f), segments_.size()});
    segments_.push_back(seg);
    duration_ += sl.len;
  }
  const PmSample last = pm_.sample(pm_duration_);
  addRotation(attitude_, -params_.gravity.normalized(), last.p, last.v);

  for (const auto& seg : segments_) {
    const int n = std::max(1, static_cast<int>(std::ceil(seg.duration / sample_dt)));
    for (int k = 0; k < n; ++k) {
      const double t = seg.t_start + seg.duration * k / n;
      samples_.push_back(GuideSample{t, stateAt(t)});
    }
  }
  samples_.push_back(GuideSample{duration_, stateAt(duration_)});
}

std::size_t GuideReference::phaseAt(double t) const {
  auto it = std::upper_bound(phases_.begin(), phases_.end(), t,
                             [](double v, const GuidePhase& p) { return v < p.t_start; });
  if (it == phases_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(phases_.begin(), it)) - 1;
}

QuadState GuideReference::stateAt(double t) const {
  t = std::clamp(t, 0.0, duration_);
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double v, const GuideSegment& s) { return v < s.t_start; });
  const GuideSegment& seg = it == segments_.begin() ? segments_.front() : *std::prev(it);
  const double tau = std::clamp(t - seg.t_start, 0.0, seg.duration);
  QuadState x;
  if (seg.rotation) {
    x.p = seg.hold_p;
    x.v = seg.hold_v;
    x.q = (seg.q_start * Quat(Eigen::AngleAxisd(seg.profile.angleAt(tau), seg.profile.axis)))
            .normalized();
    x.w = seg.profile.rateAt(tau) * seg.profile.axis;
  } else {
    const PmSample s = pm_.sample(std::min(seg.pm_start + tau, pm_duration_));
    x.p = s.p;
    x.v = s.v;
    x.q = seg.q_start;
  }
  return x;
}

MotorCommand GuideReference::commandAt(double t) const {
  if (phases_.empty() || t >= duration_) return params_.hoverCommand();
  return phases_[phaseAt(t)].command;
}

double GuideReference::fromPmTime(double t_pm) const {
  for (const auto& seg : segments_) {
    if (seg.rotation) continue;
    if (t_pm <= seg.pm_start + seg.duration + 1e-12)
      return seg.t_start + std::clamp(t_pm - seg.pm_start, 0.0, seg.duration);
  }
  return duration_;
}

}  // namespace mtp
