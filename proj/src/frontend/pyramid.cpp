#include "ums/frontend/pyramid.hpp"

#include <algorithm>
#include <cmath>

#include "ums/core/error.hpp"

namespace ums {

namespace {

// Separable binomial blur with edge clamping.
Image binomial_blur(const Image& src) {
  static const int kKernel[5] = {1, 4, 6, 4, 1};
  const int w = src.width, h = src.height;
  std::vector<int> tmp(static_cast<size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int acc = 0;
      for (int k = -2; k <= 2; ++k) {
        const int xx = std::clamp(x + k, 0, w - 1);
        acc += kKernel[k + 2] * src.at(xx, y);
      }
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int acc = 0;
      for (int k = -2; k <= 2; ++k) {
        const int yy = std::clamp(y + k, 0, h - 1);
        acc += kKernel[k + 2] * tmp[static_cast<size_t>(yy) * w + x];
      }
      out.at(x, y) = static_cast<std::uint8_t>((acc + 128) >> 8);
    }
  }
  return out;
}

double sample_field(const std::vector<float>& f, int w, int h, double x, double y) {
  x = std::clamp(x, 0.0, w - 1.0);
  y = std::clamp(y, 0.0, h - 1.0);
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = (1.0 - fx) * f[static_cast<size_t>(y0) * w + x0] +
                     fx * f[static_cast<size_t>(y0) * w + x1];
  const double bot = (1.0 - fx) * f[static_cast<size_t>(y1) * w + x0] +
                     fx * f[static_cast<size_t>(y1) * w + x1];
  return (1.0 - fy) * top + fy * bot;
}

}  // namespace

// Scharr derivatives: smoothing [3 10 3] across, central difference along.
void scharr_gradients(const Image& img, std::vector<float>* grad_x,
                      std::vector<float>* grad_y) {
  const int w = img.width, h = img.height;
  grad_x->assign(static_cast<size_t>(w) * h, 0.0f);
  grad_y->assign(static_cast<size_t>(w) * h, 0.0f);
  auto px = [&](int x, int y) {
    return static_cast<double>(img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (3.0 * (px(x + 1, y - 1) - px(x - 1, y - 1)) +
                         10.0 * (px(x + 1, y) - px(x - 1, y)) +
                         3.0 * (px(x + 1, y + 1) - px(x - 1, y + 1))) /
                        32.0;
      const double gy = (3.0 * (px(x - 1, y + 1) - px(x - 1, y - 1)) +
                         10.0 * (px(x, y + 1) - px(x, y - 1)) +
                         3.0 * (px(x + 1, y + 1) - px(x + 1, y - 1))) /
                        32.0;
      (*grad_x)[static_cast<size_t>(y) * w + x] = static_cast<float>(gx);
      (*grad_y)[static_cast<size_t>(y) * w + x] = static_cast<float>(gy);
    }
  }
}

double PyramidLevel::sample_gx(double x, double y) const {
  return sample_field(grad_x, image.width, image.height, x, y);
}

double PyramidLevel::sample_gy(double x, double y) const {
  return sample_field(grad_y, image.width, image.height, x, y);
}

Image downsample_half(const Image& src) {
  const Image blurred = binomial_blur(src);
  Image out(src.width / 2, src.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = blurred.at(2 * x, 2 * y);
    }
  }
  return out;
}

ImagePyramid::ImagePyramid(const Image& base, int levels) {
  if (levels != 2 && levels != 4) {
    raise(ErrorCode::ConfigError, "pyramid level count must be 2 or 4");
  }
  if (base.empty()) raise(ErrorCode::ConfigError, "pyramid needs a non-empty image");
  levels_.resize(levels);
  levels_[0].image = base;
  for (int i = 1; i < levels; ++i) {
    if (levels_[i - 1].image.width < 4 || levels_[i - 1].image.height < 4) {
      raise(ErrorCode::ConfigError, "image too small for the requested pyramid depth");
    }
    levels_[i].image = downsample_half(levels_[i - 1].image);
  }
  for (auto& level : levels_) {
    scharr_gradients(level.image, &level.grad_x, &level.grad_y);
  }
}

}  // namespace ums
