#include "mlfield/semantic/io.hpp"

#include <map>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/mask/io.hpp"

namespace mlfield::semantic {

Propagation propagation_from_json(const nlohmann::json& j) {
  try {
    Propagation p;
    std::map<int, FrameInfo> by_id;
    for (const auto& f : j.at("frames")) {
      FrameInfo info{f.at("frame_id").get<int>(), f.at("width").get<int>(), f.at("height").get<int>()};
      by_id[info.frame_id] = info;
      p.frames.push_back(info);
    }
    for (const auto& m : j.at("masks")) {
      const int frame_id = m.at("frame_id").get<int>();
      auto it = by_id.find(frame_id);
      if (it == by_id.end()) throw FormatError("mask refers to unknown frame " + std::to_string(frame_id));
      p.masks.push_back({frame_id, m.at("target_id").get<std::uint32_t>(),
                         mask::mask_from_json(m, frame_id, it->second.width, it->second.height)});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed propagation document: ") + e.what());
  }
}

nlohmann::json propagation_to_json(const Propagation& p) {
  nlohmann::json j;
  j["frames"] = nlohmann::json::array();
  for (const auto& f : p.frames) j["frames"].push_back({{"frame_id", f.frame_id}, {"width", f.width}, {"height", f.height}});
  j["masks"] = nlohmann::json::array();
  for (const auto& m : p.masks) {
    auto mj = mask::mask_to_json(m.mask);
    mj["frame_id"] = m.frame_id;
    mj["target_id"] = m.target_id;
    j["masks"].push_back(std::move(mj));
  }
  return j;
}

Propagation read_propagation(const std::filesystem::path& path) {
  try {
    return propagation_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace mlfield::semantic
