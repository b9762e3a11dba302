#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlfield/common/raster.hpp"
#include "mlfield/mask/candidate_mask.hpp"
#include "mlfield/mask/hierarchy.hpp"

namespace mlfield::semantic {

enum class TargetLevel : std::uint8_t { Object = 0, Part = 1 };

const char* to_string(TargetLevel level);

struct FrameInfo {
  int frame_id = 0;
  int width = 0;
  int height = 0;
};

// One target's mask in one frame as reported by the external identity
// propagation (video tracker or synthetic ground truth).
struct PropagatedMask {
  int frame_id = 0;
  std::uint32_t target_id = 0;
  mask::CandidateMask mask;
};

// Per-frame identity rasters, one per level. 0 = no identity.
struct IdentityFrame {
  int frame_id = 0;
  IdRaster object_ids;
  IdRaster part_ids;

  friend bool operator==(const IdentityFrame&, const IdentityFrame&) = default;
};

// Paints propagated masks into per-level rasters. Where masks of the same
// level overlap, the smaller mask wins (ties: smaller id). Throws NotFound for
// ids absent from the hierarchy and InvalidInput for unknown frames or
// resolution mismatches.
std::vector<IdentityFrame> ingest_identity_frames(std::span<const FrameInfo> frames, const mask::Hierarchy& hierarchy,
                                                  std::span<const PropagatedMask> propagated);

}  // namespace mlfield::semantic
