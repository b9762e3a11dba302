#include "mlfield/mask/hierarchy.hpp"

#include <algorithm>
#include <string>

#include "mlfield/common/error.hpp"

namespace mlfield::mask {
namespace {

bool overlaps(const CandidateMask& a, const CandidateMask& b) {
  const int x0 = std::max(a.bbox.x_min, b.bbox.x_min);
  const int y0 = std::max(a.bbox.y_min, b.bbox.y_min);
  const int x1 = std::min(a.bbox.x_max, b.bbox.x_max);
  const int y1 = std::min(a.bbox.y_max, b.bbox.y_max);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (a.set(x, y) && b.set(x, y)) return true;
  return false;
}

bool contains(const CandidateMask& outer, const CandidateMask& inner) {
  if (inner.area == 0) return true;
  for (int y = inner.bbox.y_min; y <= inner.bbox.y_max; ++y)
    for (int x = inner.bbox.x_min; x <= inner.bbox.x_max; ++x)
      if (inner.set(x, y) && !outer.set(x, y)) return false;
  return true;
}

}  // namespace

const ObjectEntry* Hierarchy::find_object(std::uint32_t target_id) const {
  for (const auto& o : objects)
    if (o.target_id == target_id) return &o;
  return nullptr;
}

const PartEntry* Hierarchy::find_part(std::uint32_t target_id) const {
  for (const auto& p : parts)
    if (p.target_id == target_id) return &p;
  return nullptr;
}

std::vector<const PartEntry*> Hierarchy::parts_of(int object_index) const {
  std::vector<const PartEntry*> out;
  for (const auto& p : parts)
    if (p.object_index == object_index) out.push_back(&p);
  return out;
}

Hierarchy build_hierarchy(std::vector<CandidateMask> objects,
                          std::vector<std::vector<CandidateMask>> parts_per_object) {
  if (parts_per_object.size() > objects.size())
    throw InvalidInput("more part lists than objects");
  parts_per_object.resize(objects.size());

  Hierarchy h;
  if (!objects.empty()) {
    h.frame_id = objects.front().frame_id;
    h.width = objects.front().width();
    h.height = objects.front().height();
  }
  std::uint32_t next_id = 1;
  for (std::size_t i = 0; i < objects.size(); ++i)
    h.objects.push_back({static_cast<int>(i), next_id++, std::move(objects[i]), std::nullopt});
  for (std::size_t i = 0; i < parts_per_object.size(); ++i)
    for (std::size_t j = 0; j < parts_per_object[i].size(); ++j)
      h.parts.push_back(
          {static_cast<int>(i), static_cast<int>(j), next_id++, std::move(parts_per_object[i][j]), std::nullopt});
  validate(h);
  return h;
}

void validate(const Hierarchy& h) {
  for (const auto& o : h.objects)
    if (o.mask.width() != h.width || o.mask.height() != h.height)
      throw InvariantViolation("object " + std::to_string(o.object_index) + " has a mismatched resolution");
  for (std::size_t a = 0; a < h.objects.size(); ++a)
    for (std::size_t b = a + 1; b < h.objects.size(); ++b)
      if (overlaps(h.objects[a].mask, h.objects[b].mask))
        throw InvariantViolation("objects " + std::to_string(a) + " and " + std::to_string(b) + " overlap");

  for (const auto& p : h.parts) {
    if (p.object_index < 0 || static_cast<std::size_t>(p.object_index) >= h.objects.size())
      throw InvariantViolation("part references missing object " + std::to_string(p.object_index));
    if (!p.mask.pixels.same_shape(h.objects[p.object_index].mask.pixels))
      throw InvariantViolation("part has a mismatched resolution");
    if (!contains(h.objects[p.object_index].mask, p.mask))
      throw InvariantViolation("part " + std::to_string(p.part_index) + " of object " +
                               std::to_string(p.object_index) + " leaves its parent region");
  }
  for (std::size_t a = 0; a < h.parts.size(); ++a)
    for (std::size_t b = a + 1; b < h.parts.size(); ++b)
      if (h.parts[a].object_index == h.parts[b].object_index && overlaps(h.parts[a].mask, h.parts[b].mask))
        throw InvariantViolation("parts of object " + std::to_string(h.parts[a].object_index) + " overlap");
}

}  // namespace mlfield::mask
