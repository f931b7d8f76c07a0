#pragma once

#include <cstdint>
#include <vector>

#include "ums/core/stereo_rig.hpp"
#include "ums/frontend/pyramid.hpp"

namespace ums {

struct KltOptions {
  int half_window = 10;           // 21x21 patch
  int max_iterations = 30;        // per level
  double tolerance = 0.01;        // px step size for convergence
  double min_eig_per_pixel = 0.75;  // patch texture floor (structure tensor)
  double fb_threshold = 0.5;      // px forward-backward gate; < 0 disables
};

// Pyramidal Lucas-Kanade, coarse to fine over `levels` levels of both
// pyramids. For point i the optional `seeds` provides the starting guess in
// the next image (defaults to the point itself). A point ends up lost when
// the patch leaves the image at full resolution, the iteration diverges or
// runs out of texture, or the forward-backward round trip misses the start
// by more than the gate.
void track_features(const ImagePyramid& prev, const ImagePyramid& next,
                    const std::vector<Vec2>& points, int levels,
                    std::vector<Vec2>* tracked, std::vector<std::uint8_t>* status,
                    const KltOptions& options = {},
                    const std::vector<Vec2>* seeds = nullptr);

struct StereoMatchResult {
  std::vector<Vec2> right_points;
  std::vector<std::uint8_t> status;   // 1 = matched
  std::vector<std::uint8_t> retried;  // 1 = the coarse-pair pass failed and the
                                      //     full-depth retry recovered the match
};

// Left-to-right correspondence by KLT on the two finest levels, seeded at the
// left position; a point the short pyramid loses is retried with all four
// levels. Matches farther than `epipolar_threshold` pixels from the epipolar
// line of the left ray are rejected.
StereoMatchResult stereo_match(const ImagePyramid& left, const ImagePyramid& right,
                               const std::vector<Vec2>& left_points, const StereoRig& rig,
                               const KltOptions& options = {},
                               double epipolar_threshold = 1.5);

}  // namespace ums
