#pragma once

#include <cstdint>
#include <vector>

#include "ums/core/transform.hpp"

namespace ums {

struct PnpConfig {
  int max_iterations = 200;
  double confidence = 0.99;
  // Inlier gate: angle between observed and predicted bearing. 2 px at the
  // nominal focal length is the default operating point.
  double angle_threshold_rad = 2.0 / 460.0;
  double min_inlier_ratio = 0.5;
  std::uint64_t seed = 1;
};

struct PnpResult {
  Transform T_w_c;  // camera pose (camera -> world)
  std::vector<std::uint8_t> inliers;
  int inlier_count = 0;
  double mean_angle_error_rad = 0.0;
};

// Camera pose from world points and unit bearings: RANSAC over DLT pose fits,
// then Gauss-Newton refinement on the consensus set. Throws TooFewPoints
// (< 6 correspondences) and NoConsensus (best inlier ratio below minimum).
PnpResult pnp_ransac(const std::vector<Vec3>& points_w, const std::vector<Vec3>& bearings,
                     const PnpConfig& config = PnpConfig());

}  // namespace ums
