#include "mlfield/query/engine.hpp"

#include "mlfield/common/error.hpp"
#include "mlfield/query/decode.hpp"

namespace mlfield::query {

QueryEngine::QueryEngine(semantic::MappingDictionary dict, field::Scene scene,
                         std::shared_ptr<const semantic::EmbeddingProvider> provider)
    : QueryEngine(std::make_shared<const semantic::MappingDictionary>(std::move(dict)),
                  std::make_shared<const field::Scene>(std::move(scene)), std::move(provider)) {}

QueryEngine::QueryEngine(std::shared_ptr<const semantic::MappingDictionary> dict,
                         std::shared_ptr<const field::Scene> scene,
                         std::shared_ptr<const semantic::EmbeddingProvider> provider)
    : dict_(std::move(dict)), scene_(std::move(scene)), provider_(std::move(provider)) {
  if (!provider_) throw InvalidInput("query engine needs an embedding provider");
  if (!dict_ || !scene_) throw InvalidInput("query engine needs a dictionary and a scene");
  if (!dict_->records.empty() && provider_->dim() != dict_->embedding_dim())
    throw InvalidInput("provider dimension " + std::to_string(provider_->dim()) + " differs from dictionary dimension " +
                       std::to_string(dict_->embedding_dim()));
  ctx_ = default_context(*provider_);
  options_.embed_label = [this](const std::string& label) { return embed_query(label); };
}

bool QueryEngine::set_view(const field::CameraPose& camera) {
  if (frames_ && frames_->object.camera == camera) return false;
  frames_ = field::render_both_levels(*scene_, camera, {.with_depth = true});
  return true;
}

const field::LevelFrames& QueryEngine::frames() const {
  if (!frames_) throw InvalidInput("no view has been rendered yet");
  return *frames_;
}

const Embedding& QueryEngine::embed_query(const std::string& text) {
  auto it = text_cache_.find(text);
  if (it == text_cache_.end()) it = text_cache_.emplace(text, provider_->embed_text(text)).first;
  return it->second;
}

BinaryRaster QueryEngine::mask_of(std::uint32_t target_id) const {
  const auto& rec = dict_->at(target_id);
  const auto& f = frames();
  const auto& frame = rec.level == TargetLevel::Object ? f.object : f.part;
  return decode_mask(frame.features, rec.code, dict_->tolerance);
}

std::vector<QueryResult> QueryEngine::query(const std::string& text, LevelHint hint, int k) {
  frames();
  Query q{text, embed_query(text), hint};
  std::vector<QueryResult> out;
  for (const auto& r : top_k_query(*dict_, q, ctx_, k, options_)) out.push_back({r, mask_of(r.target_id)});
  ++served_;
  return out;
}

}  // namespace mlfield::query
