#pragma once

#include <cstdint>

namespace ums {

enum class TrajectoryKind {
  Stationary,
  StraightConstantVelocity,  // uniform straight run, optional smooth turn later
  Circle,
  Figure8,
  LoopRevisit,  // repeated circle laps, revisiting every pose
};

enum class TextureProfile {
  Rich,            // both cameras see the full scene
  LeftOnly,        // right camera sees only a sparse subset of the scene
  BlackoutWindow,  // no observations (and black frames) inside (t0, t1)
};

struct Scenario {
  std::uint64_t seed = 1;
  TrajectoryKind kind = TrajectoryKind::Figure8;
  double duration = 10.0;    // s
  double imu_rate = 200.0;   // Hz
  double frame_rate = 20.0;  // Hz; must divide imu_rate
  int point_count = 600;
  TextureProfile texture = TextureProfile::Rich;
  double blackout_start = 0.0;  // BlackoutWindow bounds (t0, t1)
  double blackout_end = 0.0;

  // Circle / LoopRevisit geometry.
  double circle_radius = 10.0;  // m
  double circle_speed = 2.0;    // m/s

  // StraightConstantVelocity: uniform motion, then a smooth heading change.
  double straight_speed = 1.2;  // m/s
  double turn_start = -1.0;     // s; < 0 places the turn at 60% of duration
  double turn_duration = 6.0;   // s
  double turn_angle = 1.2;      // rad, total heading change

  bool render_images = false;
};

// Throws ConfigError when rates or duration are non-positive, the frame rate
// does not divide the IMU rate, or the blackout window is inverted.
void validate(const Scenario& scenario);

// Turn onset, resolving the default placement.
double turn_start_time(const Scenario& scenario);

}  // namespace ums
