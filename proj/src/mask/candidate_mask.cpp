#include "mlfield/mask/candidate_mask.hpp"

#include <algorithm>

namespace mlfield::mask {

BoundingBox tight_bbox(const BinaryRaster& pixels) {
  BoundingBox box{pixels.width(), pixels.height(), -1, -1};
  bool any = false;
  for (int y = 0; y < pixels.height(); ++y) {
    for (int x = 0; x < pixels.width(); ++x) {
      if (!pixels(x, y)) continue;
      any = true;
      box.x_min = std::min(box.x_min, x);
      box.y_min = std::min(box.y_min, y);
      box.x_max = std::max(box.x_max, x);
      box.y_max = std::max(box.y_max, y);
    }
  }
  return any ? box : BoundingBox{};
}

CandidateMask CandidateMask::from_pixels(int frame_id, BinaryRaster pixels) {
  CandidateMask m;
  m.frame_id = frame_id;
  for (auto& p : pixels.pixels()) {
    p = p ? 1 : 0;
    m.area += p;
  }
  m.bbox = tight_bbox(pixels);
  m.pixels = std::move(pixels);
  return m;
}

bool is_consistent(const CandidateMask& m) {
  std::int64_t area = 0;
  for (auto p : m.pixels.pixels()) area += p ? 1 : 0;
  return area == m.area && tight_bbox(m.pixels) == m.bbox;
}

}  // namespace mlfield::mask
