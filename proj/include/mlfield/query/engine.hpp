#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlfield/common/raster.hpp"
#include "mlfield/field/render.hpp"
#include "mlfield/query/resolve.hpp"

namespace mlfield::query {

struct QueryResult {
  Resolved target;
  BinaryRaster mask;  // current view, decoded from the frame of the target's level
};

// Holds a trained scene, its dictionary and the frames of one viewpoint.
// Queries decode the cached frames and never rasterize. Not thread-safe;
// callers serialize access (the service holds one lock per session).
class QueryEngine {
 public:
  // Throws InvalidInput when the provider and dictionary dimensions differ.
  QueryEngine(semantic::MappingDictionary dict, field::Scene scene,
              std::shared_ptr<const semantic::EmbeddingProvider> provider);
  // Shares immutable data between engines (one per service session).
  QueryEngine(std::shared_ptr<const semantic::MappingDictionary> dict, std::shared_ptr<const field::Scene> scene,
              std::shared_ptr<const semantic::EmbeddingProvider> provider);

  const semantic::MappingDictionary& dictionary() const { return *dict_; }
  const field::Scene& scene() const { return *scene_; }
  const RelevancyContext& context() const { return ctx_; }

  // Renders both feature levels (and depth) for `camera` unless it is the
  // cached pose. Returns whether a render happened.
  bool set_view(const field::CameraPose& camera);
  bool has_view() const { return frames_.has_value(); }
  // Throws InvalidInput before the first set_view.
  const field::LevelFrames& frames() const;

  // Text embeddings are memoized per string.
  const Embedding& embed_query(const std::string& text);

  std::vector<QueryResult> query(const std::string& text, LevelHint hint = LevelHint::Auto, int k = 1);
  BinaryRaster mask_of(std::uint32_t target_id) const;

  std::uint64_t queries_served() const { return served_; }

 private:
  std::shared_ptr<const semantic::MappingDictionary> dict_;
  std::shared_ptr<const field::Scene> scene_;
  std::shared_ptr<const semantic::EmbeddingProvider> provider_;
  RelevancyContext ctx_;
  ResolveOptions options_;
  std::optional<field::LevelFrames> frames_;
  std::unordered_map<std::string, Embedding> text_cache_;
  std::uint64_t served_ = 0;
};

}  // namespace mlfield::query
