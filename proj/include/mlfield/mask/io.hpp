#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "mlfield/mask/hierarchy.hpp"
#include "mlfield/mask/pipeline.hpp"

namespace mlfield::mask {

// {"area": n, "bbox": [x_min, y_min, x_max, y_max], "counts": [...]}; the raster
// size is implied by the owning document.
nlohmann::json mask_to_json(const CandidateMask& m);

// Decodes and cross-checks area and bbox against the runs (FormatError on mismatch).
CandidateMask mask_from_json(const nlohmann::json& j, int frame_id, int width, int height);

// Candidate corpus document (one per frame):
// {"frame_id", "width", "height", "masks": [mask + optional "label" +
//  optional "tile_candidates": [tile-local masks, each with optional "label"]]}
FrameCandidates frame_candidates_from_json(const nlohmann::json& j);
nlohmann::json frame_candidates_to_json(const FrameCandidates& f);
FrameCandidates read_frame_candidates(const std::filesystem::path& path);

nlohmann::json hierarchy_to_json(const Hierarchy& h);
Hierarchy hierarchy_from_json(const nlohmann::json& j);
void write_hierarchy(const std::filesystem::path& path, const Hierarchy& h);
Hierarchy read_hierarchy(const std::filesystem::path& path);

}  // namespace mlfield::mask
