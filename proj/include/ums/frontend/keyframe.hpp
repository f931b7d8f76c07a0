#pragma once

#include "ums/frontend/features.hpp"

namespace ums {

struct KeyframeThresholds {
  double max_time_gap = 1.0;      // s since the last keyframe
  double min_parallax_px = 10.0;  // mean rotation-compensated parallax
  int min_tracked = 20;           // stereo features + depth-initialized 2D
};

// Applies the three keyframe rules in order: elapsed time, mean parallax of
// shared features (rotation-compensated with `R_curr_from_kf`, the camera-
// frame rotation taking last-keyframe coordinates into the current frame, so
// pure rotation triggers nothing), and the well-constrained feature count.
KeyframeDecision select_keyframe(const StereoFrameFeatures& current,
                                 const StereoFrameFeatures& last_kf,
                                 const Rotation& R_curr_from_kf,
                                 const KeyframeThresholds& thresholds, double focal_px);

}  // namespace ums
