#pragma once

#include "ums/core/camera.hpp"
#include "ums/core/transform.hpp"

namespace ums {

// Calibrated stereo pair plus mounting on the body frame.
// T_left_right maps right-camera coordinates into the left camera;
// T_body_left maps left-camera coordinates into the body (IMU) frame.
struct StereoRig {
  CameraIntrinsics left;
  CameraIntrinsics right;
  Transform T_left_right;
  Transform T_body_left;

  double baseline() const { return T_left_right.t.norm(); }

  Transform T_body_right() const { return T_body_left * T_left_right; }
};

// Persistent triangulated landmark; position stored in the world frame.
struct MapPoint {
  std::uint64_t id = 0;
  Vec3 p_w = Vec3::Zero();
  int track_length = 0;
};

}  // namespace ums
