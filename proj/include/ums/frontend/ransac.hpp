#pragma once

#include <cstdint>
#include <vector>

#include "ums/core/rotation.hpp"

namespace ums {

struct RansacOptions {
  double threshold_px = 1.0;   // Sampson distance gate, in pixels
  double focal_px = 460.0;     // converts normalized-plane distances to px
  int max_iterations = 200;
  double confidence = 0.99;
  double small_motion_px = 0.5;  // median flow below this skips the model fit
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
};

// Epipolar consensus over bearing pairs (previous frame, current frame):
// fits an essential matrix to eight-point samples and masks out pairs whose
// Sampson distance exceeds the gate. Nearly motionless pairs (median flow
// below small_motion_px) are all accepted, since the model is degenerate
// without translation. Throws TooFewPairs for fewer than 8 pairs.
std::vector<std::uint8_t> epipolar_ransac(const std::vector<Vec3>& prev_bearings,
                                          const std::vector<Vec3>& curr_bearings,
                                          const RansacOptions& options = {});

}  // namespace ums
