#pragma once

#include "mlfield/common/feature_image.hpp"
#include "mlfield/common/raster.hpp"
#include "mlfield/semantic/codes.hpp"

namespace mlfield::query {

// Pixel set iff every channel lies within t of the code.
BinaryRaster decode_mask(const FeatureImage& frame, const semantic::LowDimCode& code, double t);

}  // namespace mlfield::query
