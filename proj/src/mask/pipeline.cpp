#include "mlfield/mask/pipeline.hpp"

#include "mlfield/common/error.hpp"

namespace mlfield::mask {
namespace {

template <typename T>
std::optional<std::string> label_at(const std::vector<T>& labels, std::size_t i) {
  return i < labels.size() ? labels[i] : std::nullopt;
}

}  // namespace

Hierarchy extract_hierarchy(const FrameCandidates& frame, const HollowConfig& hollow) {
  for (const auto& m : frame.masks)
    if (m.width() != frame.width || m.height() != frame.height)
      throw InvalidInput("candidate resolution does not match frame " + std::to_string(frame.frame_id));

  const auto objects = filter_object_masks_indexed(frame.masks);
  std::vector<CandidateMask> object_masks;
  std::vector<std::vector<CandidateMask>> parts(objects.size());
  std::vector<std::vector<std::optional<std::string>>> part_labels(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    object_masks.push_back(objects[i].mask);
    const std::size_t src = objects[i].source_index;
    if (src >= frame.tile_candidates.size()) continue;
    for (auto& accepted : extract_part_masks_indexed(objects[i].mask, frame.tile_candidates[src])) {
      if (is_hollow(accepted.mask, hollow)) continue;
      std::optional<std::string> label;
      if (src < frame.tile_labels.size()) label = label_at(frame.tile_labels[src], accepted.source_index);
      part_labels[i].push_back(std::move(label));
      parts[i].push_back(std::move(accepted.mask));
    }
  }

  auto h = build_hierarchy(std::move(object_masks), std::move(parts));
  h.frame_id = frame.frame_id;
  h.width = frame.width;
  h.height = frame.height;
  for (std::size_t i = 0; i < h.objects.size(); ++i) h.objects[i].label = label_at(frame.labels, objects[i].source_index);
  for (auto& p : h.parts) p.label = part_labels[p.object_index][p.part_index];
  return h;
}

}  // namespace mlfield::mask
