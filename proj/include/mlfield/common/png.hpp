#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlfield/common/raster.hpp"

namespace mlfield {

// 8-bit interleaved image as decoded from / encoded to PNG.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray), 3 (RGB) or 4 (RGBA)
  std::vector<std::uint8_t> data;

  friend bool operator==(const Image8&, const Image8&) = default;
};

std::vector<std::uint8_t> encode_png(const Image8& image);

// 1-bit grayscale PNG; set pixels are written white.
std::vector<std::uint8_t> encode_mask_png(const BinaryRaster& mask);

// Decodes any PNG into 8-bit samples (palette/low bit depth are expanded).
Image8 decode_png(std::span<const std::uint8_t> bytes);

}  // namespace mlfield
