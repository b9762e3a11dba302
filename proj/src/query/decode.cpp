#include "mlfield/query/decode.hpp"

#include <cmath>

namespace mlfield::query {

BinaryRaster decode_mask(const FeatureImage& frame, const semantic::LowDimCode& code, double t) {
  BinaryRaster out(frame.width(), frame.height(), 0);
  const auto& v = frame.values();
  for (std::size_t p = 0; p < frame.pixel_count(); ++p) {
    bool in = true;
    for (int k = 0; k < 3 && in; ++k) in = std::abs(v[p * 3 + k] - static_cast<double>(code.components[k])) <= t;
    out[p] = in ? 1 : 0;
  }
  return out;
}

}  // namespace mlfield::query
