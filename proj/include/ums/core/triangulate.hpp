#pragma once

#include "ums/core/transform.hpp"

namespace ums {

struct Triangulation {
  Vec3 point_w = Vec3::Zero();
  double parallax_deg = 0.0;
};

// Linear two-view triangulation from unit bearings. T_w_a / T_w_b are camera
// poses (camera -> world). Throws LowParallax below `min_parallax_deg` and
// BehindCamera when the solution has non-positive depth in either view.
Triangulation triangulate(const Transform& T_w_a, const Transform& T_w_b, const Vec3& bearing_a,
                          const Vec3& bearing_b, double min_parallax_deg = 1.0);

// Depth of a stereo-matched point along the left bearing. T_left_right is the
// right camera expressed in the left camera. Returns a least-squares ray
// intersection; throws LowParallax when the rays are near parallel.
double stereo_depth(const Transform& T_left_right, const Vec3& bearing_left,
                    const Vec3& bearing_right, double min_parallax_deg = 0.01);

}  // namespace ums
