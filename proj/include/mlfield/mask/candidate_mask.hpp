#pragma once

#include <cstdint>

#include "mlfield/common/raster.hpp"

namespace mlfield::mask {

// Inclusive pixel bounds. An empty mask carries {0, 0, -1, -1}.
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;

  bool empty() const { return x_max < x_min || y_max < y_min; }
  int width() const { return empty() ? 0 : x_max - x_min + 1; }
  int height() const { return empty() ? 0 : y_max - y_min + 1; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

BoundingBox tight_bbox(const BinaryRaster& pixels);

// A raw binary segmentation mask, as produced by an automatic mask generator.
struct CandidateMask {
  int frame_id = 0;
  BinaryRaster pixels;
  std::int64_t area = 0;
  BoundingBox bbox;

  // Derives area and bbox from the raster; nonzero bytes count as set.
  static CandidateMask from_pixels(int frame_id, BinaryRaster pixels);

  int width() const { return pixels.width(); }
  int height() const { return pixels.height(); }
  bool set(int x, int y) const { return pixels(x, y) != 0; }

  friend bool operator==(const CandidateMask&, const CandidateMask&) = default;
};

// True when area and bbox agree with the raster.
bool is_consistent(const CandidateMask& m);

}  // namespace mlfield::mask
