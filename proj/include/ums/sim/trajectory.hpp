#pragma once

#include "ums/imu/types.hpp"
#include "ums/sim/scenario.hpp"

namespace ums {

struct TrajectorySample {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();       // world-frame acceleration (no gravity)
  Rotation q;                  // body-to-world
  Vec3 omega_body = Vec3::Zero();
};

// Continuous-time motion oracle. Every quantity is evaluated in closed form,
// so the emitted IMU stream is exactly consistent with the pose path. The
// attitude follows the horizontal velocity direction (yaw) composed with small
// smooth roll/pitch oscillations where the scenario calls for them; body rates
// come from the yaw-pitch-roll rate map.
class TrajectoryModel {
 public:
  explicit TrajectoryModel(const Scenario& scenario);

  TrajectorySample at(double t) const;
  Transform pose(double t) const;
  KeyframeState state(double t) const;  // zero biases

  // Exact sensor read at time t: gyro = body rates, accel = specific force.
  ImuSample imu(double t, const Vec3& gravity_w) const;

 private:
  struct Angles {
    double roll = 0.0, pitch = 0.0;
    double droll = 0.0, dpitch = 0.0;
  };
  Angles wobble(double t) const;
  void translation(double t, Vec3* p, Vec3* v, Vec3* a) const;

  Scenario scenario_;
  double turn_start_ = 0.0;
  // wobble configuration
  bool wobble_on_ = false;
  bool wobble_gated_ = false;  // fades in after the turn starts
  double wobble_amp_roll_ = 0.0, wobble_amp_pitch_ = 0.0;
  double wobble_freq_roll_ = 0.0, wobble_freq_pitch_ = 0.0;
};

}  // namespace ums
