#pragma once

#include <filesystem>

#include "mlfield/semantic/providers.hpp"
#include "mlfield/service/config.hpp"
#include "mlfield/toy/toy_scene.hpp"

namespace mlfield::demo {

struct ToyAssetOptions {
  // Optimize the features from the identity frames; otherwise paint the
  // dictionary codes straight onto the Gaussians.
  bool train = false;
  int iterations = 2000;
};

// Writes scene.bin, dictionary.bin, graph.bin and cameras.bin for `toy` into
// `dir` (created if needed) and returns their paths.
service::ScenePaths write_toy_assets(const std::filesystem::path& dir, toy::ToyScene toy,
                                     const semantic::EmbeddingProvider& provider, const ToyAssetOptions& options = {});

// Raw inputs for the offline pipeline, as the external segmenter and tracker
// would deliver them: candidates.json (view-0 objects with their parts as tile
// candidates), hierarchy.json, propagation.json, cameras.json and an
// unfeatured scene.bin.
void write_pipeline_inputs(const std::filesystem::path& dir, const toy::ToyScene& toy);

}  // namespace mlfield::demo
