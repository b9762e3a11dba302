#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlfield/mask/candidate_mask.hpp"

namespace mlfield::mask {

struct ObjectEntry {
  int object_index = 0;
  std::uint32_t target_id = 0;
  CandidateMask mask;
  std::optional<std::string> label;
};

struct PartEntry {
  int object_index = 0;
  int part_index = 0;
  std::uint32_t target_id = 0;
  CandidateMask mask;
  std::optional<std::string> label;
};

// Object- and part-level masks of one frame with their subordination links.
// Target ids start at 1 (0 means "no identity"): objects take 1..n in order,
// parts follow in (object, part) order.
struct Hierarchy {
  int frame_id = 0;
  int width = 0;
  int height = 0;
  std::vector<ObjectEntry> objects;
  std::vector<PartEntry> parts;

  const ObjectEntry* find_object(std::uint32_t target_id) const;
  const PartEntry* find_part(std::uint32_t target_id) const;
  std::vector<const PartEntry*> parts_of(int object_index) const;
  std::size_t target_count() const { return objects.size() + parts.size(); }
};

// Assembles a hierarchy from filtered objects and per-object filtered parts.
// Throws InvariantViolation when the inputs break disjointness or containment.
Hierarchy build_hierarchy(std::vector<CandidateMask> objects,
                          std::vector<std::vector<CandidateMask>> parts_per_object);

// Checks every Hierarchy invariant; throws InvariantViolation on the first failure.
void validate(const Hierarchy& h);

}  // namespace mlfield::mask
