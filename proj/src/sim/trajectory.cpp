#include "ums/sim/trajectory.hpp"

#include <cmath>

namespace ums {

namespace {

constexpr double kTau = 2.0 * M_PI;

// Quintic smoothstep: C^2 everywhere including the clamped ends.
double smoothstep(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return ((6.0 * u - 15.0) * u + 10.0) * u * u * u;
}

double smoothstep_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return ((30.0 * u - 60.0) * u + 30.0) * u * u;
}

// Running integral of the smoothstep from 0.
double smoothstep_i(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 0.5 + (u - 1.0);
  return ((u - 3.0) * u + 2.5) * u * u * u * u;
}

// Figure-eight (Lissajous) geometry: one slow lap per minute keeps body rates
// gentle enough that midpoint integration of the emitted IMU stream stays well
// inside the discretization budgets used by the tests.
constexpr double kFig8HalfSpanX = 8.0;
constexpr double kFig8HalfSpanY = 4.0;
constexpr double kFig8Period = 60.0;
constexpr double kFig8BobAmp = 0.3;

}  // namespace

TrajectoryModel::TrajectoryModel(const Scenario& scenario) : scenario_(scenario) {
  validate(scenario);
  turn_start_ = turn_start_time(scenario);
  switch (scenario.kind) {
    case TrajectoryKind::Stationary:
    case TrajectoryKind::Circle:
      wobble_on_ = false;
      break;
    case TrajectoryKind::StraightConstantVelocity:
      // Perfectly unexcited until the turn begins; tilt oscillations fade in
      // with the turn so rotation then spans more than one axis.
      wobble_on_ = true;
      wobble_gated_ = true;
      wobble_amp_roll_ = 0.05;
      wobble_amp_pitch_ = 0.04;
      wobble_freq_roll_ = 0.35;
      wobble_freq_pitch_ = 0.50;
      break;
    case TrajectoryKind::Figure8:
    case TrajectoryKind::LoopRevisit:
      wobble_on_ = true;
      wobble_amp_roll_ = 0.05;
      wobble_amp_pitch_ = 0.04;
      wobble_freq_roll_ = 0.11;
      wobble_freq_pitch_ = 0.07;
      break;
  }
}

TrajectoryModel::Angles TrajectoryModel::wobble(double t) const {
  Angles out;
  if (!wobble_on_) return out;

  double env = 1.0, denv = 0.0;
  double tw = t;
  if (wobble_gated_) {
    const double ramp = 3.0;  // s
    const double u = (t - turn_start_) / ramp;
    env = smoothstep(u);
    denv = smoothstep_d(u) / ramp;
    tw = t - turn_start_;
    if (env == 0.0 && denv == 0.0) return out;
  }

  const double wr = kTau * wobble_freq_roll_;
  const double wp = kTau * wobble_freq_pitch_;
  const double sr = std::sin(wr * tw + 0.4), cr = std::cos(wr * tw + 0.4);
  const double sp = std::sin(wp * tw + 1.3), cp = std::cos(wp * tw + 1.3);
  out.roll = wobble_amp_roll_ * env * sr;
  out.droll = wobble_amp_roll_ * (denv * sr + env * wr * cr);
  out.pitch = wobble_amp_pitch_ * env * sp;
  out.dpitch = wobble_amp_pitch_ * (denv * sp + env * wp * cp);
  return out;
}

void TrajectoryModel::translation(double t, Vec3* p, Vec3* v, Vec3* a) const {
  const Vec3 origin(0.0, 0.0, 1.0);
  switch (scenario_.kind) {
    case TrajectoryKind::Stationary: {
      *p = origin;
      v->setZero();
      a->setZero();
      return;
    }
    case TrajectoryKind::StraightConstantVelocity: {
      // Velocity blends from heading 0 to the turned heading along a quintic
      // smoothstep; its integral gives the position in closed form.
      const double s = scenario_.straight_speed;
      const double T = scenario_.turn_duration;
      const Vec3 d0(1.0, 0.0, 0.0);
      const Vec3 d1(std::cos(scenario_.turn_angle), std::sin(scenario_.turn_angle), 0.0);
      if (t <= turn_start_) {
        *p = origin + s * t * d0;
        *v = s * d0;
        a->setZero();
        return;
      }
      const double u = (t - turn_start_) / T;
      const double sig = smoothstep(u);
      *v = s * ((1.0 - sig) * d0 + sig * d1);
      *a = s * (smoothstep_d(u) / T) * (d1 - d0);
      *p = origin + s * (turn_start_ * d0 + (t - turn_start_) * d0 +
                         T * smoothstep_i(u) * (d1 - d0));
      return;
    }
    case TrajectoryKind::Circle:
    case TrajectoryKind::LoopRevisit: {
      const double r = scenario_.circle_radius;
      const double w = scenario_.circle_speed / r;
      const double ph = w * t - 0.5 * M_PI;  // start at the origin heading +x
      const Vec3 center = origin + Vec3(0.0, r, 0.0);
      *p = center + r * Vec3(std::cos(ph), std::sin(ph), 0.0);
      *v = r * w * Vec3(-std::sin(ph), std::cos(ph), 0.0);
      *a = -r * w * w * Vec3(std::cos(ph), std::sin(ph), 0.0);
      return;
    }
    case TrajectoryKind::Figure8: {
      const double w = kTau / kFig8Period;
      const double wz = 2.0 * w;
      *p = origin + Vec3(kFig8HalfSpanX * std::sin(w * t), kFig8HalfSpanY * std::sin(2.0 * w * t),
                         kFig8BobAmp * std::sin(wz * t));
      *v = Vec3(kFig8HalfSpanX * w * std::cos(w * t),
                2.0 * kFig8HalfSpanY * w * std::cos(2.0 * w * t),
                kFig8BobAmp * wz * std::cos(wz * t));
      *a = Vec3(-kFig8HalfSpanX * w * w * std::sin(w * t),
                -4.0 * kFig8HalfSpanY * w * w * std::sin(2.0 * w * t),
                -kFig8BobAmp * wz * wz * std::sin(wz * t));
      return;
    }
  }
}

TrajectorySample TrajectoryModel::at(double t) const {
  TrajectorySample out;
  translation(t, &out.p, &out.v, &out.a);

  // Yaw follows the horizontal velocity; rate from the velocity/acceleration.
  double yaw = 0.0, dyaw = 0.0;
  const double v_xy2 = out.v.x() * out.v.x() + out.v.y() * out.v.y();
  if (v_xy2 > 1e-12) {
    yaw = std::atan2(out.v.y(), out.v.x());
    dyaw = (out.v.x() * out.a.y() - out.v.y() * out.a.x()) / v_xy2;
  }
  const Angles ang = wobble(t);

  out.q = Rotation::about_z(yaw) * Rotation::exp(Vec3(0.0, ang.pitch, 0.0)) *
          Rotation::exp(Vec3(ang.roll, 0.0, 0.0));

  // Body rates for the yaw-pitch-roll composition.
  const double sth = std::sin(ang.pitch), cth = std::cos(ang.pitch);
  const double sph = std::sin(ang.roll), cph = std::cos(ang.roll);
  out.omega_body = Vec3(ang.droll - dyaw * sth,
                        ang.dpitch * cph + dyaw * cth * sph,
                        dyaw * cth * cph - ang.dpitch * sph);
  return out;
}

Transform TrajectoryModel::pose(double t) const {
  const TrajectorySample s = at(t);
  return Transform(s.q, s.p);
}

KeyframeState TrajectoryModel::state(double t) const {
  const TrajectorySample s = at(t);
  KeyframeState out;
  out.p = s.p;
  out.v = s.v;
  out.q = s.q;
  return out;
}

ImuSample TrajectoryModel::imu(double t, const Vec3& gravity_w) const {
  const TrajectorySample s = at(t);
  ImuSample out;
  out.t = t;
  out.gyro = s.omega_body;
  out.accel = s.q.inverse() * (s.a - gravity_w);
  return out;
}

}  // namespace ums
