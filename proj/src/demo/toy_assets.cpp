#include "mlfield/demo/toy_assets.hpp"

#include <fstream>

#include "mlfield/common/error.hpp"
#include "mlfield/field/optimize.hpp"
#include "mlfield/field/render.hpp"
#include "mlfield/nav/graph.hpp"
#include "mlfield/mask/io.hpp"
#include "mlfield/semantic/gt_frames.hpp"

namespace mlfield::demo {

service::ScenePaths write_toy_assets(const std::filesystem::path& dir, toy::ToyScene toy,
                                     const semantic::EmbeddingProvider& provider, const ToyAssetOptions& options) {
  std::filesystem::create_directories(dir);
  const auto dict =
      semantic::build_mapping_dictionary(toy.hierarchy, semantic::embed_hierarchy(toy.hierarchy, provider));
  if (options.train) {
    const auto gt = semantic::generate_gt_feature_frames(toy.identity, dict);
    std::vector<field::TrainingView> views;
    for (std::size_t i = 0; i < gt.size(); ++i) views.push_back({toy.cameras[i], gt[i].object, gt[i].part});
    field::TrainConfig cfg;
    cfg.iterations = options.iterations;
    field::optimize_features(toy.scene, views, cfg);
  } else {
    toy::paint_codes(toy, dict);
  }
  auto graph = nav::dilate_keypoints(toy.cameras);
  nav::build_edges(
      graph, [&](const field::CameraPose& c) { return field::render_depth(toy.scene, c); }, toy.cameras.front());

  service::ScenePaths p{dir / "scene.bin", dir / "dictionary.bin", dir / "graph.bin", dir / "cameras.bin"};
  field::write_scene(p.scene, toy.scene);
  semantic::write_dictionary(p.dictionary, dict);
  nav::write_graph(p.graph, graph);
  field::write_cameras(p.cameras, toy.cameras);
  return p;
}

namespace {

void dump(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump() << "\n";
}

}  // namespace

void write_pipeline_inputs(const std::filesystem::path& dir, const toy::ToyScene& toy) {
  std::filesystem::create_directories(dir);
  const auto& h = toy.hierarchy;
  mask::FrameCandidates f;
  f.frame_id = h.frame_id;
  f.width = h.width;
  f.height = h.height;
  for (std::size_t o = 0; o < h.objects.size(); ++o) {
    const auto& obj = h.objects[o].mask;
    std::vector<mask::CandidateMask> tiles;
    std::vector<std::optional<std::string>> tile_labels;
    for (const auto* part : h.parts_of(static_cast<int>(o))) {
      BinaryRaster crop(obj.bbox.width(), obj.bbox.height(), 0);
      for (int y = 0; y < crop.height(); ++y)
        for (int x = 0; x < crop.width(); ++x) crop(x, y) = part->mask.pixels(x + obj.bbox.x_min, y + obj.bbox.y_min);
      tiles.push_back(mask::CandidateMask::from_pixels(h.frame_id, std::move(crop)));
      tile_labels.push_back(part->label);
    }
    f.masks.push_back(obj);
    f.labels.push_back(h.objects[o].label);
    f.tile_candidates.push_back(std::move(tiles));
    f.tile_labels.push_back(std::move(tile_labels));
  }
  dump(dir / "candidates.json", mask::frame_candidates_to_json(f));
  mask::write_hierarchy(dir / "hierarchy.json", h);
  dump(dir / "propagation.json", semantic::propagation_to_json(toy.propagation));
  nlohmann::json cams = nlohmann::json::array();
  for (const auto& c : toy.cameras) cams.push_back(field::camera_to_json(c));
  dump(dir / "cameras.json", cams);
  field::write_scene(dir / "scene.bin", toy.scene);
}

}  // namespace mlfield::demo
