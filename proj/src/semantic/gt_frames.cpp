#include "mlfield/semantic/gt_frames.hpp"

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/common/parallel.hpp"

namespace mlfield::semantic {
namespace {

FeatureImage paint(const IdRaster& ids, const MappingDictionary& dict, TargetLevel level) {
  FeatureImage out(ids.width(), ids.height());
  for (int y = 0; y < ids.height(); ++y)
    for (int x = 0; x < ids.width(); ++x) {
      const auto id = ids(x, y);
      if (id == 0) continue;
      const auto& r = dict.at(id);
      if (r.level != level)
        throw InvalidInput("id " + std::to_string(id) + " is a " + to_string(r.level) + " but appears in the " +
                           to_string(level) + " raster");
      out.set_pixel(x, y, {r.code.components[0], r.code.components[1], r.code.components[2]});
    }
  return out;
}

constexpr std::uint32_t kVersion = 1;

void put_image(BinaryWriter& out, const FeatureImage& img) {
  for (double v : img.values()) out.put(static_cast<float>(v));
}

void get_image(BinaryReader& in, FeatureImage& img) {
  for (double& v : img.values()) v = in.get<float>();
}

}  // namespace

std::vector<GtFeatureFrame> generate_gt_feature_frames(std::span<const IdentityFrame> frames,
                                                       const MappingDictionary& dict) {
  std::vector<GtFeatureFrame> out(frames.size());
  parallel_for(frames.size(), [&](std::size_t i) {
    const auto& f = frames[i];
    out[i] = {f.frame_id, paint(f.object_ids, dict, TargetLevel::Object), paint(f.part_ids, dict, TargetLevel::Part)};
  });
  return out;
}

std::vector<std::uint8_t> serialize_gt_frames(std::span<const GtFeatureFrame> frames) {
  BinaryWriter out;
  out.put_bytes("MLFG");
  out.put(kVersion);
  out.put(static_cast<std::uint32_t>(frames.size()));
  for (const auto& f : frames) {
    if (!f.object.same_shape(f.part)) throw InvalidInput("object and part ground truth differ in size");
    out.put(static_cast<std::int32_t>(f.frame_id));
    out.put(static_cast<std::uint32_t>(f.object.width()));
    out.put(static_cast<std::uint32_t>(f.object.height()));
    put_image(out, f.object);
    put_image(out, f.part);
  }
  return std::move(out).bytes();
}

std::vector<GtFeatureFrame> deserialize_gt_frames(std::span<const std::uint8_t> bytes) {
  BinaryReader in(bytes);
  in.expect_magic("MLFG");
  if (in.get<std::uint32_t>() != kVersion) throw FormatError("unsupported ground-truth frame version");
  const auto n = in.get<std::uint32_t>();
  std::vector<GtFeatureFrame> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    GtFeatureFrame f;
    f.frame_id = in.get<std::int32_t>();
    const auto w = static_cast<int>(in.get<std::uint32_t>());
    const auto h = static_cast<int>(in.get<std::uint32_t>());
    if (static_cast<std::size_t>(w) * h * 3 * sizeof(float) * 2 > in.remaining())
      throw FormatError("ground-truth frame larger than the file");
    f.object = FeatureImage(w, h);
    f.part = FeatureImage(w, h);
    get_image(in, f.object);
    get_image(in, f.part);
    out.push_back(std::move(f));
  }
  if (!in.at_end()) throw FormatError("trailing bytes after ground-truth frames");
  return out;
}

void write_gt_frames(const std::filesystem::path& path, std::span<const GtFeatureFrame> frames) {
  write_file_bytes(path, serialize_gt_frames(frames));
}

std::vector<GtFeatureFrame> read_gt_frames(const std::filesystem::path& path) {
  return deserialize_gt_frames(read_file_bytes(path));
}

}  // namespace mlfield::semantic
