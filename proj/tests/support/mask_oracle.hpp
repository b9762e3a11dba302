#pragma once

// Brute-force reference for the canvas filters. Masks are handled as sets of
// pixel coordinates and overlap is tested against the union of everything
// accepted so far, with no shared code from the implementation.

#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "mlfield/mask/candidate_mask.hpp"

namespace oracle {

using PixelSet = std::set<std::pair<int, int>>;

inline PixelSet to_set(const mlfield::mask::CandidateMask& m) {
  PixelSet s;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.pixels(x, y)) s.insert({x, y});
  return s;
}

// Visit order by selection: repeatedly pick the best remaining index.
inline std::vector<std::size_t> selection_order(const std::vector<PixelSet>& sets, bool descending) {
  std::vector<std::size_t> order;
  std::vector<bool> used(sets.size(), false);
  for (std::size_t round = 0; round < sets.size(); ++round) {
    std::size_t best = sets.size();
    for (std::size_t i = 0; i < sets.size(); ++i) {
      if (used[i]) continue;
      if (best == sets.size()) {
        best = i;
        continue;
      }
      const bool better = descending ? sets[i].size() > sets[best].size() : sets[i].size() < sets[best].size();
      if (better) best = i;
    }
    used[best] = true;
    order.push_back(best);
  }
  return order;
}

inline std::vector<std::size_t> canvas_simulation(const std::vector<PixelSet>& sets, bool descending) {
  PixelSet taken;
  std::vector<std::size_t> accepted;
  for (std::size_t i : selection_order(sets, descending)) {
    if (sets[i].empty()) continue;
    bool clash = false;
    for (const auto& p : sets[i])
      if (taken.count(p)) {
        clash = true;
        break;
      }
    if (clash) continue;
    taken.insert(sets[i].begin(), sets[i].end());
    accepted.push_back(i);
  }
  return accepted;
}

// Expected object-filter output as pixel sets in acceptance order.
inline std::vector<PixelSet> expected_objects(const std::vector<mlfield::mask::CandidateMask>& candidates) {
  std::vector<PixelSet> sets;
  for (const auto& c : candidates) sets.push_back(to_set(c));
  std::vector<PixelSet> out;
  for (auto i : canvas_simulation(sets, true)) out.push_back(sets[i]);
  return out;
}

// Expected part-filter output in frame coordinates.
inline std::vector<PixelSet> expected_parts(const mlfield::mask::CandidateMask& object,
                                            const std::vector<mlfield::mask::CandidateMask>& tiles) {
  const PixelSet parent = to_set(object);
  int x0 = object.width(), y0 = object.height();
  for (const auto& [x, y] : parent) {
    x0 = std::min(x0, x);
    y0 = std::min(y0, y);
  }
  std::vector<PixelSet> sets;
  for (const auto& t : tiles) sets.push_back(to_set(t));
  std::vector<PixelSet> out;
  for (auto i : canvas_simulation(sets, false)) {
    PixelSet framed;
    for (const auto& [x, y] : sets[i])
      if (parent.count({x + x0, y + y0})) framed.insert({x + x0, y + y0});
    if (!framed.empty()) out.push_back(framed);
  }
  return out;
}

}  // namespace oracle

namespace gen {

// Random filled shape (rectangle, ellipse or blob) on a width x height canvas.
inline mlfield::BinaryRaster random_shape(std::mt19937& rng, int width, int height) {
  mlfield::BinaryRaster r(width, height, 0);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> px(0, width - 1), py(0, height - 1);
  const int k = kind(rng);
  int ax = px(rng), bx = px(rng), ay = py(rng), by = py(rng);
  if (ax > bx) std::swap(ax, bx);
  if (ay > by) std::swap(ay, by);
  if (k == 0) {
    for (int y = ay; y <= by; ++y)
      for (int x = ax; x <= bx; ++x) r(x, y) = 1;
  } else if (k == 1) {
    const double cx = 0.5 * (ax + bx), cy = 0.5 * (ay + by);
    const double rx = 0.5 * (bx - ax) + 0.5, ry = 0.5 * (by - ay) + 0.5;
    for (int y = ay; y <= by; ++y)
      for (int x = ax; x <= bx; ++x) {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) r(x, y) = 1;
      }
  } else {
    int x = px(rng), y = py(rng);
    std::uniform_int_distribution<int> step(-1, 1);
    std::uniform_int_distribution<int> len(1, width * height / 4 + 1);
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      r(x, y) = 1;
      x = std::clamp(x + step(rng), 0, width - 1);
      y = std::clamp(y + step(rng), 0, height - 1);
    }
  }
  return r;
}

// Candidate set mixing independent shapes with exact sub-shapes and duplicates
// of earlier ones, which exercises rejections by overlap and area ties.
inline std::vector<mlfield::mask::CandidateMask> random_candidates(std::mt19937& rng, int width, int height,
                                                                   int count, int frame_id = 0) {
  std::vector<mlfield::mask::CandidateMask> out;
  std::uniform_int_distribution<int> mode(0, 5);
  for (int i = 0; i < count; ++i) {
    mlfield::BinaryRaster r;
    const int m = out.empty() ? 0 : mode(rng);
    if (m == 4) {
      r = out[std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(rng)].pixels;
      auto cut = random_shape(rng, width, height);
      for (std::size_t k = 0; k < r.size(); ++k) r[k] = r[k] && cut[k];
    } else if (m == 5) {
      r = out[std::uniform_int_distribution<std::size_t>(0, out.size() - 1)(rng)].pixels;
    } else {
      r = random_shape(rng, width, height);
    }
    out.push_back(mlfield::mask::CandidateMask::from_pixels(frame_id, std::move(r)));
  }
  return out;
}

}  // namespace gen
