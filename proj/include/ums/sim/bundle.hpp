#pragma once

#include <memory>
#include <vector>

#include "ums/core/image.hpp"
#include "ums/core/stereo_rig.hpp"
#include "ums/imu/types.hpp"
#include "ums/sim/scenario.hpp"
#include "ums/sim/trajectory.hpp"

namespace ums {

struct SimLandmark {
  int id = 0;
  Vec3 p_w = Vec3::Zero();
};

struct SimFeatureObs {
  int landmark_id = 0;
  bool in_left = false;
  bool in_right = false;
  Vec2 left_px = Vec2::Zero();
  Vec2 right_px = Vec2::Zero();
  bool left_outlier = false;  // pixel was replaced by a planted outlier
  bool right_outlier = false;
};

struct SimFrame {
  double t = 0.0;
  std::vector<SimFeatureObs> obs;  // sorted by landmark id
  Image left_image;                // filled only when rendering is requested
  Image right_image;
};

// Everything an acceptance test needs to interrogate a synthetic run: the
// continuous-time motion oracle, the sampled truth, the sensor streams, and a
// record of whatever corruption was planted.
struct GroundTruthBundle {
  Scenario scenario;
  StereoRig rig;
  std::shared_ptr<const TrajectoryModel> trajectory;

  std::vector<SimLandmark> landmarks;
  std::vector<ImuSample> imu;                 // exact from generate; noisy after perturb
  std::vector<double> frame_times;
  std::vector<KeyframeState> frame_states;    // true state at each frame time
  std::vector<SimFrame> frames;

  Vec3 planted_gyro_bias = Vec3::Zero();
  Vec3 planted_accel_bias = Vec3::Zero();
};

// Camera model shared by all synthetic scenes (distortion-free).
StereoRig synthetic_rig();

}  // namespace ums
