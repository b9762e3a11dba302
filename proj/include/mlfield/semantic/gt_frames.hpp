#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "mlfield/common/feature_image.hpp"
#include "mlfield/semantic/dictionary.hpp"
#include "mlfield/semantic/identity.hpp"

namespace mlfield::semantic {

// Ground-truth feature targets for one frame, one image per level.
struct GtFeatureFrame {
  int frame_id = 0;
  FeatureImage object;
  FeatureImage part;

  friend bool operator==(const GtFeatureFrame&, const GtFeatureFrame&) = default;
};

// Every pixel gets its id's code, background pixels (id 0) get (0, 0, 0).
// Throws NotFound for ids missing from the dictionary and InvalidInput when an
// id shows up in the raster of the wrong level. Frames are processed in parallel.
std::vector<GtFeatureFrame> generate_gt_feature_frames(std::span<const IdentityFrame> frames,
                                                       const MappingDictionary& dict);

// "MLFG" u32 version(=1) u32 frame_count, then per frame:
//   i32 frame_id u32 width u32 height, object features H*W*3 f32, part features H*W*3 f32
std::vector<std::uint8_t> serialize_gt_frames(std::span<const GtFeatureFrame> frames);
std::vector<GtFeatureFrame> deserialize_gt_frames(std::span<const std::uint8_t> bytes);
void write_gt_frames(const std::filesystem::path& path, std::span<const GtFeatureFrame> frames);
std::vector<GtFeatureFrame> read_gt_frames(const std::filesystem::path& path);

}  // namespace mlfield::semantic
