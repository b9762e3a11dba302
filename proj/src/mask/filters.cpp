#include "mlfield/mask/filters.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mlfield/common/error.hpp"

namespace mlfield::mask {
namespace {

void require_same_frame(std::span<const CandidateMask> candidates) {
  if (candidates.empty()) return;
  const auto& first = candidates.front();
  for (const auto& c : candidates) {
    if (c.frame_id != first.frame_id)
      throw InvalidInput("candidates span frames " + std::to_string(first.frame_id) + " and " +
                         std::to_string(c.frame_id));
    if (!c.pixels.same_shape(first.pixels)) throw InvalidInput("candidates have inconsistent resolutions");
    if (!is_consistent(c)) throw InvalidInput("candidate area/bbox does not match its pixels");
  }
}

// Runs the canvas procedure over candidates in the given visiting order and
// returns indices of accepted masks in acceptance order.
std::vector<std::size_t> place_on_canvas(std::span<const CandidateMask> candidates,
                                         const std::vector<std::size_t>& order) {
  std::vector<std::size_t> accepted;
  if (candidates.empty()) return accepted;
  BinaryRaster taken(candidates.front().width(), candidates.front().height(), 0);
  for (std::size_t idx : order) {
    const auto& c = candidates[idx];
    if (c.area == 0) continue;
    const auto& b = c.bbox;
    bool free = true;
    for (int y = b.y_min; y <= b.y_max && free; ++y)
      for (int x = b.x_min; x <= b.x_max; ++x)
        if (c.set(x, y) && taken(x, y)) {
          free = false;
          break;
        }
    if (!free) continue;
    for (int y = b.y_min; y <= b.y_max; ++y)
      for (int x = b.x_min; x <= b.x_max; ++x)
        if (c.set(x, y)) taken(x, y) = 1;
    accepted.push_back(idx);
  }
  return accepted;
}

std::vector<std::size_t> order_by_area(std::span<const CandidateMask> candidates, bool descending) {
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? candidates[a].area > candidates[b].area : candidates[a].area < candidates[b].area;
  });
  return order;
}

}  // namespace

std::vector<AcceptedMask> filter_object_masks_indexed(std::span<const CandidateMask> candidates) {
  require_same_frame(candidates);
  std::vector<AcceptedMask> out;
  for (std::size_t idx : place_on_canvas(candidates, order_by_area(candidates, true)))
    out.push_back({idx, candidates[idx]});
  return out;
}

std::vector<CandidateMask> filter_object_masks(std::span<const CandidateMask> candidates) {
  std::vector<CandidateMask> out;
  for (auto& a : filter_object_masks_indexed(candidates)) out.push_back(std::move(a.mask));
  return out;
}

ImageTile tile_of(const CandidateMask& object) {
  return {object.bbox.x_min, object.bbox.y_min, object.bbox.width(), object.bbox.height()};
}

std::vector<CandidateMask> extract_part_masks(const CandidateMask& object,
                                              std::span<const CandidateMask> tile_candidates) {
  std::vector<CandidateMask> out;
  for (auto& a : extract_part_masks_indexed(object, tile_candidates)) out.push_back(std::move(a.mask));
  return out;
}

std::vector<AcceptedMask> extract_part_masks_indexed(const CandidateMask& object,
                                                     std::span<const CandidateMask> tile_candidates) {
  if (!is_consistent(object)) throw InvalidInput("object area/bbox does not match its pixels");
  const ImageTile tile = tile_of(object);
  for (const auto& c : tile_candidates) {
    if (c.width() != tile.width || c.height() != tile.height)
      throw InvalidInput("tile candidate of size " + std::to_string(c.width()) + "x" +
                         std::to_string(c.height()) + " extends outside the " + std::to_string(tile.width) +
                         "x" + std::to_string(tile.height) + " object tile");
  }
  require_same_frame(tile_candidates);

  std::vector<AcceptedMask> out;
  for (std::size_t idx : place_on_canvas(tile_candidates, order_by_area(tile_candidates, false))) {
    const auto& local = tile_candidates[idx];
    BinaryRaster frame_pixels(object.width(), object.height(), 0);
    const auto& b = local.bbox;
    for (int y = b.y_min; y <= b.y_max; ++y)
      for (int x = b.x_min; x <= b.x_max; ++x) {
        const int fx = x + tile.x0;
        const int fy = y + tile.y0;
        if (local.set(x, y) && object.set(fx, fy)) frame_pixels(fx, fy) = 1;
      }
    auto part = CandidateMask::from_pixels(object.frame_id, std::move(frame_pixels));
    if (part.area > 0) out.push_back({idx, std::move(part)});
  }
  return out;
}

std::int64_t enclosed_hole_area(const CandidateMask& m, Connectivity complement_connectivity) {
  if (m.area == 0) return 0;
  const auto& b = m.bbox;
  const int w = b.width();
  const int h = b.height();
  // 0 = unvisited complement, 1 = mask, 2 = visited complement
  std::vector<std::uint8_t> state(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) state[y * w + x] = m.set(x + b.x_min, y + b.y_min) ? 1 : 0;

  const bool eight = complement_connectivity == Connectivity::Eight;
  std::int64_t holes = 0;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (state[start] != 0) continue;
    std::int64_t size = 0;
    bool touches_border = false;
    stack.assign(1, start);
    state[start] = 2;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      ++size;
      const int px = p % w;
      const int py = p / w;
      if (px == 0 || py == 0 || px == w - 1 || py == h - 1) touches_border = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          if (!eight && dx != 0 && dy != 0) continue;
          const int nx = px + dx;
          const int ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const int q = ny * w + nx;
          if (state[q] != 0) continue;
          state[q] = 2;
          stack.push_back(q);
        }
    }
    if (!touches_border) holes += size;
  }
  return holes;
}

bool is_hollow(const CandidateMask& m, const HollowConfig& config) {
  if (config.rho < 0.0) throw InvalidInput("hollow ratio must be non-negative");
  if (m.area == 0) return false;
  const auto holes = enclosed_hole_area(m, config.complement_connectivity);
  return holes > 0 && static_cast<double>(holes) >= config.rho * static_cast<double>(m.area);
}

std::vector<CandidateMask> filter_hollow(std::span<const CandidateMask> parts, const HollowConfig& config) {
  std::vector<CandidateMask> out;
  for (const auto& p : parts)
    if (!is_hollow(p, config)) out.push_back(p);
  return out;
}

}  // namespace mlfield::mask
