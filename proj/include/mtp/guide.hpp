#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mtp/quad_model.hpp"
#include "mtp/velocity_search.hpp"

namespace mtp {

/// Rest-to-rest rotation about a fixed body axis: full angular acceleration,
/// optional coast at the rate cap, full deceleration. With `step` > 0 the
/// phases last whole steps and the acceleration and coast rate are lowered
/// just enough to still cover `angle` exactly.
struct RotationProfile {
  Vec3 axis = Vec3::UnitX();  // body frame, unit, zero z component
  double angle = 0.0;         // rad
  double alpha = 0.0;         // rad/s^2
  double w_cap = 0.0;         // rad/s, rate about the axis
  double t_a = 0.0;           // acceleration duration, s
  double t_s = 0.0;           // coast duration, s
  double t_b = 0.0;           // deceleration duration, s

  static RotationProfile restToRest(const Vec3& axis, double angle, double alpha, double w_cap,
                                    double step = 0.0);
  double duration() const { return t_a + t_s + t_b; }
  double rateAt(double t) const;
  double angleAt(double t) const;
};

enum class GuidePhaseKind { kTranslation, kRotationAccel, kRotationCoast, kRotationDecel };

/// One constant nominal input of the guide timeline.
struct GuidePhase {
  GuidePhaseKind kind = GuidePhaseKind::kTranslation;
  double t_start = 0.0;  // guide time, s
  double duration = 0.0;
  MotorCommand command = MotorCommand::Zero();
  std::size_t segment = 0;
};

struct GuideSegment {
  bool rotation = false;
  double t_start = 0.0;  // guide time, s
  double duration = 0.0;
  // translation: slice of the point-mass trajectory, possibly several
  // constant-acceleration pieces joined
  double pm_start = 0.0;  // point-mass time of the slice start
  Vec3 thrust = Vec3::Zero();  // mean thrust acceleration, world frame
  // attitude at segment start; constant over a translation
  Quat q_start = Quat::Identity();
  // rotation: frozen translational state and the angular profile
  Vec3 hold_p = Vec3::Zero();
  Vec3 hold_v = Vec3::Zero();
  RotationProfile profile;
  double coast_thrust = 0.0;  // N per rotor while coasting, carries the weight mid-turn
  double torque_scale = 1.0;  // profile acceleration over the maximum about the axis
};

struct GuideSample {
  double t = 0.0;
  QuadState x;
};

struct GuideParams {
  double sample_dt = 0.005;        // s, spacing of the nearest-state samples
  double min_slice = 1.0 / 300.0;  // s, shorter thrust slices join the previous one
  double input_step = 1.0 / 300.0; // s, rotation phases last whole steps (0: exact times)
  // Slices shorter than this fraction of the rotation needed to reach their
  // direction also join the previous one (0 disables).
  double absorb_ratio = 0.5;
};

/// Point-mass translation with rest-to-rest attitude changes inserted at
/// every change of the thrust direction, plus alignment from and back to
/// hover at both ends. Position and velocity are frozen during rotations.
class GuideReference {
 public:
  GuideReference(const PmmTrajectory& pm, const QuadParams& params,
                 const GuideParams& guide = {});

  double duration() const { return duration_; }
  double pmDuration() const { return pm_duration_; }
  QuadState stateAt(double t) const;
  MotorCommand commandAt(double t) const;
  /// Guide time at which the translation reaches point-mass time t_pm
  /// (before a rotation inserted at that instant).
  double fromPmTime(double t_pm) const;

  const std::vector<GuideSegment>& segments() const { return segments_; }
  const std::vector<GuidePhase>& phases() const { return phases_; }
  const std::vector<GuideSample>& samples() const { return samples_; }
  /// Index of the phase containing t (the last one beyond the end).
  std::size_t phaseAt(double t) const;
  const QuadParams& params() const { return params_; }

  /// Accelerate / coast / decelerate inputs of a rotation about `axis`
  /// (body frame) with `torque_scale` of the maximum pure-axis torque; the
  /// coast holds `coast_thrust` per rotor.
  static std::array<MotorCommand, 3> rotationCommands(const Vec3& axis, double coast_thrust,
                                                      double torque_scale,
                                                      const QuadParams& params);

 private:
  void addRotation(const Quat& from, const Vec3& to_dir, const Vec3& p, const Vec3& v);
  double rotationDuration(const Quat& from, const Vec3& to_dir) const;
  void pushRotation(const Quat& from, const Vec3& axis_body, double angle, const Vec3& p,
                    const Vec3& v);

  QuadParams params_;
  std::vector<GuideSegment> segments_;
  std::vector<GuidePhase> phases_;
  std::vector<GuideSample> samples_;
  double duration_ = 0.0;
  double pm_duration_ = 0.0;
  Quat attitude_ = Quat::Identity();
  PmmTrajectory pm_;
  double input_step_ = 0.0;
};

/// Shortest rotation taking body z of `from` onto the unit vector `dir`;
/// the axis is returned in the body frame (zero z component). Antipodal
/// directions rotate about body x.
std::pair<Vec3, double> tiltRotation(const Quat& from, const Vec3& dir);

}  // namespace mtp
