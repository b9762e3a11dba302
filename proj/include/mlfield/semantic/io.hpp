#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlfield/semantic/identity.hpp"

namespace mlfield::semantic {

// Identity propagation output as delivered by the external tracker:
// {"frames": [{"frame_id", "width", "height"}...],
//  "masks":  [{"frame_id", "target_id", "area", "bbox", "counts"}...]}
struct Propagation {
  std::vector<FrameInfo> frames;
  std::vector<PropagatedMask> masks;
};

Propagation propagation_from_json(const nlohmann::json& j);
nlohmann::json propagation_to_json(const Propagation& p);
Propagation read_propagation(const std::filesystem::path& path);

}  // namespace mlfield::semantic
