#pragma once

#include <string>

#include "art/raster.hpp"

namespace art {

/// 8-bit PNG I/O with the linear [0, 255] <-> [-1, 1] mapping. Encoding uses
/// a pinned zlib configuration so identical pixels give identical bytes.

/// Reads RGB or RGBA (3 or 4 channels preserved; gray expands to RGB,
/// palette/16-bit inputs are converted down). Throws IoError.
Raster read_png(const std::string& path);

/// Writes 3-channel rasters as RGB, 4-channel as RGBA. Values are clamped to
/// [-1, 1] before quantization. Throws IoError.
void write_png(const std::string& path, const Raster& image);

}  // namespace art
