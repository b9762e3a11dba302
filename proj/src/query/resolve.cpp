#include "mlfield/query/resolve.hpp"

#include <algorithm>

#include "mlfield/common/error.hpp"

namespace mlfield::query {
namespace {

bool ranks_before(const Scored& a, const Scored& b) {
  if (a.relevancy != b.relevancy) return a.relevancy > b.relevancy;
  return a.target_id < b.target_id;
}

double score(const Embedding& image, const Embedding& query, const RelevancyContext& ctx) {
  std::vector<double> dots;
  dots.reserve(ctx.canonical_embeddings.size() + 1);
  for (const auto& c : ctx.canonical_embeddings) dots.push_back(semantic::dot(image, c));
  return relevancy_from_dots(semantic::dot(image, query), dots);
}

Embedding parent_phrase(const semantic::TargetRecord& parent, const ResolveOptions& options) {
  if (parent.label && options.embed_label) return options.embed_label(*parent.label);
  return parent.raw_embedding;
}

}  // namespace

const char* to_string(LevelHint hint) {
  switch (hint) {
    case LevelHint::Object: return "object";
    case LevelHint::Part: return "part";
    case LevelHint::Auto: return "auto";
  }
  return "?";
}

const char* to_string(ResolutionPath path) { return path == ResolutionPath::Step1 ? "step1" : "step2"; }

LevelHint parse_level_hint(const std::string& s) {
  if (s == "object") return LevelHint::Object;
  if (s == "part") return LevelHint::Part;
  if (s == "auto") return LevelHint::Auto;
  throw InvalidInput("unknown level '" + s + "' (expected object, part or auto)");
}

std::vector<Scored> rank_targets(const semantic::MappingDictionary& dict, const Embedding& query,
                                 const RelevancyContext& ctx) {
  check_embeddings(query, ctx);
  std::vector<Scored> out;
  out.reserve(dict.records.size());
  for (const auto& [id, rec] : dict.records) {
    if (rec.effective_embedding.dim() != query.dim()) throw InvalidInput("dictionary and query dimensions differ");
    out.push_back({id, score(rec.effective_embedding, query, ctx)});
  }
  std::stable_sort(out.begin(), out.end(), ranks_before);
  return out;
}

Scored preliminary_localize(const semantic::MappingDictionary& dict, const Embedding& query,
                            const RelevancyContext& ctx) {
  if (dict.records.empty()) throw InvalidInput("cannot localize in an empty dictionary");
  return rank_targets(dict, query, ctx).front();
}

TargetLevel classify_level(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                           const Scored& preliminary, double margin) {
  if (dict.at(preliminary.target_id).level == TargetLevel::Part) return TargetLevel::Part;
  for (const auto& s : rank_targets(dict, query.embedding, ctx)) {
    if (s.target_id == preliminary.target_id) continue;
    // first remaining record is the re-ranked winner
    const bool close = preliminary.relevancy - s.relevancy <= margin;
    return close && dict.at(s.target_id).level == TargetLevel::Part ? TargetLevel::Part : TargetLevel::Object;
  }
  return TargetLevel::Object;
}

TargetLevel query_level(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                        const Scored& preliminary, const ResolveOptions& options) {
  switch (query.level_hint) {
    case LevelHint::Object: return TargetLevel::Object;
    case LevelHint::Part: return TargetLevel::Part;
    case LevelHint::Auto: break;
  }
  if (options.classifier) return options.classifier(dict, query, ctx, preliminary);
  return classify_level(dict, query, ctx, preliminary);
}

Resolved resolve_at_level(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                          const Scored& preliminary, TargetLevel level, const ResolveOptions& options) {
  const auto& rec = dict.at(preliminary.target_id);
  Resolved step1{rec.id, rec.level, preliminary.relevancy, ResolutionPath::Step1, false};
  if (level == TargetLevel::Object || rec.level == TargetLevel::Part) return step1;

  const auto parts = dict.part_ids_of(rec.id);
  if (parts.empty()) return {rec.id, rec.level, preliminary.relevancy, ResolutionPath::Step2, true};

  RelevancyContext augmented = ctx;
  augmented.canonical_embeddings.push_back(parent_phrase(rec, options));
  Scored best{0, -1.0};
  for (auto id : parts) {
    const Scored s{id, score(dict.at(id).effective_embedding, query.embedding, augmented)};
    if (best.target_id == 0 || ranks_before(s, best)) best = s;
  }
  return {best.target_id, TargetLevel::Part, best.relevancy, ResolutionPath::Step2, false};
}

Resolved resolve_target(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                        const Scored& preliminary, const ResolveOptions& options) {
  check_embeddings(query.embedding, ctx);
  return resolve_at_level(dict, query, ctx, preliminary, query_level(dict, query, ctx, preliminary, options),
                          options);
}

std::vector<Resolved> top_k_query(const semantic::MappingDictionary& dict, const Query& query,
                                  const RelevancyContext& ctx, int k, const ResolveOptions& options) {
  if (k < 1) throw InvalidInput("k must be at least 1");
  if (dict.records.empty()) throw InvalidInput("cannot localize in an empty dictionary");
  const auto ranked = rank_targets(dict, query.embedding, ctx);
  const auto level = query_level(dict, query, ctx, ranked.front(), options);
  std::vector<Resolved> out;
  for (const auto& s : ranked) {
    if (static_cast<int>(out.size()) == k) break;
    auto r = resolve_at_level(dict, query, ctx, s, level, options);
    if (std::none_of(out.begin(), out.end(), [&](const Resolved& o) { return o.target_id == r.target_id; }))
      out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const Resolved& a, const Resolved& b) {
    if (a.relevancy != b.relevancy) return a.relevancy > b.relevancy;
    return a.target_id < b.target_id;
  });
  return out;
}

}  // namespace mlfield::query
