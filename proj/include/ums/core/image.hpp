#pragma once

#include <cstdint>
#include <vector>

namespace ums {

// 8-bit grayscale image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  bool empty() const { return data.empty(); }

  std::uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }

  bool contains(double x, double y, double margin = 0.0) const {
    return x >= margin && y >= margin && x <= width - 1 - margin && y <= height - 1 - margin;
  }

  // Bilinear sample; caller keeps (x, y) inside [0, w-1] x [0, h-1].
  double sample(double x, double y) const {
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = x0 + 1 < width ? x0 + 1 : x0;
    const int y1 = y0 + 1 < height ? y0 + 1 : y0;
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * at(x0, y0) + fx * at(x1, y0);
    const double bot = (1.0 - fx) * at(x0, y1) + fx * at(x1, y1);
    return (1.0 - fy) * top + fy * bot;
  }
};

}  // namespace ums
