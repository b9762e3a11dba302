#include "mlfield/mask/rle.hpp"

#include <string>

namespace mlfield::mask {

Rle rle_encode(const BinaryRaster& pixels) {
  Rle rle{pixels.width(), pixels.height(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto p : pixels.pixels()) {
    const std::uint8_t v = p ? 1 : 0;
    if (v != current) {
      rle.counts.push_back(run);
      run = 0;
      current = v;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryRaster rle_decode(const Rle& rle) {
  BinaryRaster out(rle.width, rle.height, 0);
  const std::size_t total = out.size();
  std::size_t pos = 0;
  std::uint8_t value = 0;
  for (auto run : rle.counts) {
    if (run > total - pos) throw FormatError("RLE runs exceed raster size");
    for (std::uint32_t i = 0; i < run; ++i) out[pos++] = value;
    value ^= 1;
  }
  if (pos != total)
    throw FormatError("RLE covers " + std::to_string(pos) + " of " + std::to_string(total) + " pixels");
  return out;
}

}  // namespace mlfield::mask
