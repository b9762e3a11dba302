#include "mlfield/semantic/identity.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "mlfield/common/error.hpp"

namespace mlfield::semantic {

const char* to_string(TargetLevel level) { return level == TargetLevel::Object ? "object" : "part"; }

std::vector<IdentityFrame> ingest_identity_frames(std::span<const FrameInfo> frames, const mask::Hierarchy& hierarchy,
                                                  std::span<const PropagatedMask> propagated) {
  std::map<int, std::size_t> frame_slot;
  std::vector<IdentityFrame> out;
  for (const auto& f : frames) {
    if (frame_slot.count(f.frame_id)) throw InvalidInput("duplicate frame id " + std::to_string(f.frame_id));
    frame_slot[f.frame_id] = out.size();
    out.push_back({f.frame_id, IdRaster(f.width, f.height, 0), IdRaster(f.width, f.height, 0)});
  }

  struct Paint {
    const PropagatedMask* mask;
    TargetLevel level;
  };
  std::vector<Paint> paints;
  for (const auto& p : propagated) {
    TargetLevel level;
    if (hierarchy.find_object(p.target_id))
      level = TargetLevel::Object;
    else if (hierarchy.find_part(p.target_id))
      level = TargetLevel::Part;
    else
      throw NotFound("propagated id " + std::to_string(p.target_id) + " is not in the hierarchy");
    auto slot = frame_slot.find(p.frame_id);
    if (slot == frame_slot.end()) throw InvalidInput("propagated mask for unknown frame " + std::to_string(p.frame_id));
    const auto& ids = out[slot->second].object_ids;
    if (p.mask.width() != ids.width() || p.mask.height() != ids.height())
      throw InvalidInput("propagated mask resolution differs from frame " + std::to_string(p.frame_id));
    paints.push_back({&p, level});
  }

  // Paint large-to-small so the smaller mask ends on top; among equal areas
  // the smaller id is painted last.
  std::stable_sort(paints.begin(), paints.end(), [](const Paint& a, const Paint& b) {
    if (a.mask->mask.area != b.mask->mask.area) return a.mask->mask.area > b.mask->mask.area;
    return a.mask->target_id > b.mask->target_id;
  });
  for (const auto& paint : paints) {
    auto& frame = out[frame_slot.at(paint.mask->frame_id)];
    auto& raster = paint.level == TargetLevel::Object ? frame.object_ids : frame.part_ids;
    const auto& m = paint.mask->mask;
    for (int y = m.bbox.y_min; y <= m.bbox.y_max; ++y)
      for (int x = m.bbox.x_min; x <= m.bbox.x_max; ++x)
        if (m.set(x, y)) raster(x, y) = paint.mask->target_id;
  }
  return out;
}

}  // namespace mlfield::semantic
