#include "ums/sim/scenario.hpp"

#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

void validate(const Scenario& s) {
  if (s.duration <= 0.0) raise(ErrorCode::ConfigError, "scenario duration must be positive");
  if (s.imu_rate <= 0.0 || s.frame_rate <= 0.0) {
    raise(ErrorCode::ConfigError, "scenario rates must be positive");
  }
  const double ratio = s.imu_rate / s.frame_rate;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    raise(ErrorCode::ConfigError, "frame rate must divide the IMU rate");
  }
  if (s.point_count <= 0) raise(ErrorCode::ConfigError, "scene needs at least one point");
  if (s.texture == TextureProfile::BlackoutWindow && s.blackout_end < s.blackout_start) {
    raise(ErrorCode::ConfigError, "blackout window is inverted");
  }
  if ((s.kind == TrajectoryKind::Circle || s.kind == TrajectoryKind::LoopRevisit) &&
      (s.circle_radius <= 0.0 || s.circle_speed <= 0.0)) {
    raise(ErrorCode::ConfigError, "circle radius and speed must be positive");
  }
  if (s.kind == TrajectoryKind::StraightConstantVelocity && s.turn_duration <= 0.0) {
    raise(ErrorCode::ConfigError, "turn duration must be positive");
  }
}

double turn_start_time(const Scenario& s) {
  return s.turn_start < 0.0 ? 0.6 * s.duration : s.turn_start;
}

}  // namespace ums
