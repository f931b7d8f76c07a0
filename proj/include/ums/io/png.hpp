#pragma once

#include <string>

#include "ums/core/image.hpp"

namespace ums {

// Reads an 8-bit grayscale PNG (color inputs are converted). Throws IoError.
Image read_png(const std::string& path);

// Writes an 8-bit grayscale PNG. Throws IoError.
void write_png(const std::string& path, const Image& image);

}  // namespace ums
