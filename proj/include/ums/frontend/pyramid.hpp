#pragma once

#include <vector>

#include "ums/core/image.hpp"
#include "ums/core/rotation.hpp"

namespace ums {

// One pyramid level: the image plus its Scharr gradient fields, which the
// tracker and the corner refiner sample bilinearly.
struct PyramidLevel {
  Image image;
  std::vector<float> grad_x;  // row-major, same size as image
  std::vector<float> grad_y;

  double sample_gx(double x, double y) const;
  double sample_gy(double x, double y) const;
};

// Grayscale image pyramid; level 0 is full resolution and each level halves
// the dimensions (floor) after a binomial low-pass. Level pixel (i, j)
// corresponds to full-resolution (i * 2^level, j * 2^level).
class ImagePyramid {
 public:
  // levels must be 2 or 4 (the two tracking configurations).
  ImagePyramid(const Image& base, int levels);

  int levels() const { return static_cast<int>(levels_.size()); }
  const PyramidLevel& level(int i) const { return levels_[i]; }

 private:
  std::vector<PyramidLevel> levels_;
};

// Binomial [1 4 6 4 1]/16 blur followed by factor-2 decimation.
Image downsample_half(const Image& src);

// Scharr derivative fields (smoothing [3 10 3], central difference), row-major.
void scharr_gradients(const Image& image, std::vector<float>* grad_x,
                      std::vector<float>* grad_y);

}  // namespace ums
