#pragma once

#include <span>
#include <vector>

#include "mlfield/mask/candidate_mask.hpp"

namespace mlfield::mask {

// Object-level filter. Candidates are placed on an empty canvas by descending
// area (ties: ascending input index); a mask is accepted only when none of its
// pixels is already taken. Rejected masks are treated as part-level
// duplicates caused by prompt ambiguity and dropped. Output is in acceptance
// order and pairwise disjoint.
std::vector<CandidateMask> filter_object_masks(std::span<const CandidateMask> candidates);

// An accepted mask together with the position of the candidate it came from.
struct AcceptedMask {
  std::size_t source_index = 0;
  CandidateMask mask;
};

std::vector<AcceptedMask> filter_object_masks_indexed(std::span<const CandidateMask> candidates);

// Region of the frame an object's part candidates were generated on.
struct ImageTile {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

// The tile of an object is its tight bounding box.
ImageTile tile_of(const CandidateMask& object);

// Part-level filter: same canvas procedure as the object filter but by
// ascending area, so small parts are kept and whole-object duplicates are
// rejected. Tile-local candidates must match the tile size. Accepted parts are
// translated into frame coordinates and clipped to the parent mask; parts that
// clip to nothing are dropped.
std::vector<CandidateMask> extract_part_masks(const CandidateMask& object,
                                              std::span<const CandidateMask> tile_candidates);

std::vector<AcceptedMask> extract_part_masks_indexed(const CandidateMask& object,
                                                     std::span<const CandidateMask> tile_candidates);

enum class Connectivity { Four = 4, Eight = 8 };

struct HollowConfig {
  // A mask is hollow when its enclosed holes cover at least rho * area.
  double rho = 0.25;
  // Neighbourhood used to grow complement components. The mask itself is
  // treated as 4-connected, hence the dual 8-neighbourhood by default.
  Connectivity complement_connectivity = Connectivity::Eight;
};

// Total area of complement components inside the bbox that do not touch the bbox border.
std::int64_t enclosed_hole_area(const CandidateMask& m, Connectivity complement_connectivity);

bool is_hollow(const CandidateMask& m, const HollowConfig& config = {});

std::vector<CandidateMask> filter_hollow(std::span<const CandidateMask> parts, const HollowConfig& config = {});

}  // namespace mlfield::mask
