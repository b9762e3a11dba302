#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mlfield/mask/filters.hpp"
#include "mlfield/mask/hierarchy.hpp"

namespace mlfield::mask {

// One frame's raw output of the external mask generator: image-scale
// candidates plus, per candidate, the masks generated on that candidate's tile.
struct FrameCandidates {
  int frame_id = 0;
  int width = 0;
  int height = 0;
  std::vector<CandidateMask> masks;
  std::vector<std::optional<std::string>> labels;           // parallel to masks
  std::vector<std::vector<CandidateMask>> tile_candidates;  // parallel to masks, tile-local
  std::vector<std::vector<std::optional<std::string>>> tile_labels;
};

// Object filter -> per-object part filter -> hollow filter -> hierarchy.
Hierarchy extract_hierarchy(const FrameCandidates& frame, const HollowConfig& hollow = {});

}  // namespace mlfield::mask
