#pragma once

#include <vector>

#include "ums/core/image.hpp"
#include "ums/core/rotation.hpp"

namespace ums {

struct DetectOptions {
  int budget = 150;            // total feature budget for the frame
  double min_distance = 20.0;  // px mask radius at 752 px width, scaled to the image
  double quality_level = 0.01;  // keep corners above this fraction of the best score

  // Sub-pixel refinement: iterative solve of the gradient-orthogonality
  // condition over a small window.
  int refine_half_window = 2;  // 5x5
  int refine_max_iterations = 20;
  double refine_tolerance = 0.01;  // px

  double scaled_min_distance(int image_width) const {
    return min_distance * image_width / 752.0;
  }
};

// Shi-Tomasi corners ranked by the structure tensor's smaller eigenvalue,
// refined to sub-pixel. Returns up to (budget - |existing|) corners, none
// closer than the mask radius to an existing point or to each other.
std::vector<Vec2> detect_features(const Image& image, const std::vector<Vec2>& existing,
                                  const DetectOptions& options);

// One sub-pixel refinement step sequence for an integer corner estimate.
Vec2 refine_subpixel(const Image& image, const Vec2& corner, const DetectOptions& options);

}  // namespace ums
