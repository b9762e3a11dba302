#include "mlfield/mask/io.hpp"

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/mask/rle.hpp"

namespace mlfield::mask {

using nlohmann::json;

namespace {

std::optional<std::string> optional_label(const json& j) {
  if (auto it = j.find("label"); it != j.end() && !it->is_null()) return it->get<std::string>();
  return std::nullopt;
}

void put_label(json& j, const std::optional<std::string>& label) {
  if (label) j["label"] = *label;
}

}  // namespace

json mask_to_json(const CandidateMask& m) {
  return {{"area", m.area},
          {"bbox", {m.bbox.x_min, m.bbox.y_min, m.bbox.x_max, m.bbox.y_max}},
          {"counts", rle_encode(m.pixels).counts}};
}

CandidateMask mask_from_json(const json& j, int frame_id, int width, int height) {
  try {
    Rle rle{width, height, j.at("counts").get<std::vector<std::uint32_t>>()};
    auto m = CandidateMask::from_pixels(frame_id, rle_decode(rle));
    const auto box = j.at("bbox").get<std::vector<int>>();
    if (box.size() != 4) throw FormatError("bbox must have four entries");
    if (j.at("area").get<std::int64_t>() != m.area) throw FormatError("stored area disagrees with RLE");
    if (BoundingBox{box[0], box[1], box[2], box[3]} != m.bbox) throw FormatError("stored bbox disagrees with RLE");
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed mask: ") + e.what());
  }
}

FrameCandidates frame_candidates_from_json(const json& j) {
  try {
    FrameCandidates f;
    f.frame_id = j.at("frame_id").get<int>();
    f.width = j.at("width").get<int>();
    f.height = j.at("height").get<int>();
    for (const auto& mj : j.at("masks")) {
      auto m = mask_from_json(mj, f.frame_id, f.width, f.height);
      std::vector<CandidateMask> tiles;
      std::vector<std::optional<std::string>> tile_labels;
      if (auto it = mj.find("tile_candidates"); it != mj.end()) {
        for (const auto& tj : *it) {
          tiles.push_back(mask_from_json(tj, f.frame_id, m.bbox.width(), m.bbox.height()));
          tile_labels.push_back(optional_label(tj));
        }
      }
      f.labels.push_back(optional_label(mj));
      f.masks.push_back(std::move(m));
      f.tile_candidates.push_back(std::move(tiles));
      f.tile_labels.push_back(std::move(tile_labels));
    }
    return f;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed candidate document: ") + e.what());
  }
}

json frame_candidates_to_json(const FrameCandidates& f) {
  json masks = json::array();
  for (std::size_t i = 0; i < f.masks.size(); ++i) {
    json mj = mask_to_json(f.masks[i]);
    if (i < f.labels.size()) put_label(mj, f.labels[i]);
    if (i < f.tile_candidates.size() && !f.tile_candidates[i].empty()) {
      json tiles = json::array();
      for (std::size_t k = 0; k < f.tile_candidates[i].size(); ++k) {
        json tj = mask_to_json(f.tile_candidates[i][k]);
        if (i < f.tile_labels.size() && k < f.tile_labels[i].size()) put_label(tj, f.tile_labels[i][k]);
        tiles.push_back(std::move(tj));
      }
      mj["tile_candidates"] = std::move(tiles);
    }
    masks.push_back(std::move(mj));
  }
  return {{"frame_id", f.frame_id}, {"width", f.width}, {"height", f.height}, {"masks", std::move(masks)}};
}

FrameCandidates read_frame_candidates(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return frame_candidates_from_json(j);
}

json hierarchy_to_json(const Hierarchy& h) {
  json objects = json::array();
  for (const auto& o : h.objects) {
    json oj{{"object_index", o.object_index}, {"target_id", o.target_id}, {"mask", mask_to_json(o.mask)}};
    put_label(oj, o.label);
    objects.push_back(std::move(oj));
  }
  json parts = json::array();
  for (const auto& p : h.parts) {
    json pj{{"object_index", p.object_index},
            {"part_index", p.part_index},
            {"target_id", p.target_id},
            {"mask", mask_to_json(p.mask)}};
    put_label(pj, p.label);
    parts.push_back(std::move(pj));
  }
  return {{"frame_id", h.frame_id},
          {"width", h.width},
          {"height", h.height},
          {"objects", std::move(objects)},
          {"parts", std::move(parts)}};
}

Hierarchy hierarchy_from_json(const json& j) {
  try {
    Hierarchy h;
    h.frame_id = j.at("frame_id").get<int>();
    h.width = j.at("width").get<int>();
    h.height = j.at("height").get<int>();
    for (const auto& oj : j.at("objects"))
      h.objects.push_back({oj.at("object_index").get<int>(), oj.at("target_id").get<std::uint32_t>(),
                           mask_from_json(oj.at("mask"), h.frame_id, h.width, h.height), optional_label(oj)});
    for (const auto& pj : j.at("parts"))
      h.parts.push_back({pj.at("object_index").get<int>(), pj.at("part_index").get<int>(),
                         pj.at("target_id").get<std::uint32_t>(),
                         mask_from_json(pj.at("mask"), h.frame_id, h.width, h.height), optional_label(pj)});
    validate(h);
    return h;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed hierarchy: ") + e.what());
  }
}

void write_hierarchy(const std::filesystem::path& path, const Hierarchy& h) {
  write_text_file(path, hierarchy_to_json(h).dump(1));
}

Hierarchy read_hierarchy(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return hierarchy_from_json(j);
}

}  // namespace mlfield::mask
