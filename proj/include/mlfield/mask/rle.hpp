#pragma once

#include <cstdint>
#include <vector>

#include "mlfield/common/raster.hpp"

namespace mlfield::mask {

// Run-length encoding over row-major pixel order. The first run always counts
// zeros (it is 0 when the first pixel is set); runs then alternate.
struct Rle {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const BinaryRaster& pixels);

// Throws FormatError when the runs do not cover exactly width * height pixels.
BinaryRaster rle_decode(const Rle& rle);

}  // namespace mlfield::mask
