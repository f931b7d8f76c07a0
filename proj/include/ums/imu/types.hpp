#pragma once

#include <vector>

#include "ums/core/transform.hpp"

namespace ums {

constexpr double kGravityMagnitude = 9.80665;

// World gravity vector; z is up, so gravity points along -z.
inline Vec3 gravity_world(double magnitude = kGravityMagnitude) {
  return Vec3(0.0, 0.0, -magnitude);
}

struct ImuSample {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();   // rad/s
  Vec3 accel = Vec3::Zero();  // m/s^2, specific force
};

// Continuous-time noise densities and bias random-walk intensities.
struct ImuNoise {
  double accel_noise = 0.08;     // m/s^2/sqrt(Hz)
  double gyro_noise = 0.004;     // rad/s/sqrt(Hz)
  double accel_walk = 4e-5;      // m/s^3/sqrt(Hz)
  double gyro_walk = 2e-6;       // rad/s^2/sqrt(Hz)
};

struct KeyframeState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Rotation q;
  Vec3 ba = Vec3::Zero();
  Vec3 bg = Vec3::Zero();

  Transform pose() const { return Transform(q, p); }
};

// Per-axis change-rate clamp applied to raw samples before use. A sample may
// not move more than `max_delta` per axis from the previous accepted sample.
struct SaturationLimits {
  bool apply_gyro = true;
  bool apply_accel = true;
  Vec3 gyro_max_delta = Vec3::Constant(0.5);    // rad/s per sample step
  Vec3 accel_max_delta = Vec3::Constant(4.0);   // m/s^2 per sample step
};

ImuSample saturate_sample(const ImuSample& previous, const ImuSample& raw,
                          const SaturationLimits& limits);

}  // namespace ums
