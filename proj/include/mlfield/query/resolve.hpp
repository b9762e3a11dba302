#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mlfield/query/relevancy.hpp"
#include "mlfield/semantic/dictionary.hpp"

namespace mlfield::query {

using semantic::TargetLevel;

enum class LevelHint : std::uint8_t { Object, Part, Auto };
enum class ResolutionPath : std::uint8_t { Step1, Step2 };

const char* to_string(LevelHint hint);
const char* to_string(ResolutionPath path);
// "object", "part" or "auto"; throws InvalidInput otherwise.
LevelHint parse_level_hint(const std::string& s);

struct Query {
  std::string text;
  Embedding embedding;  // unit-norm
  LevelHint level_hint = LevelHint::Auto;
};

struct Scored {
  std::uint32_t target_id = 0;
  double relevancy = 0.0;
};

struct Resolved {
  std::uint32_t target_id = 0;
  TargetLevel level = TargetLevel::Object;
  double relevancy = 0.0;
  ResolutionPath path = ResolutionPath::Step1;
  // Step 2 reached an object without parts; the object itself is returned.
  bool fell_back = false;

  friend bool operator==(const Resolved&, const Resolved&) = default;
};

// Every record scored on its effective embedding, descending relevancy,
// ties by ascending id.
std::vector<Scored> rank_targets(const semantic::MappingDictionary& dict, const Embedding& query,
                                 const RelevancyContext& ctx);

// Top of rank_targets. Throws InvalidInput on an empty dictionary.
Scored preliminary_localize(const semantic::MappingDictionary& dict, const Embedding& query,
                            const RelevancyContext& ctx);

// Decides whether an Auto query asks for a part.
using LevelClassifier = std::function<TargetLevel(const semantic::MappingDictionary&, const Query&,
                                                  const RelevancyContext&, const Scored& preliminary)>;

inline constexpr double kAutoPartMargin = 0.05;

// Part iff the preliminary winner is a part, or the best remaining record
// after removing it is a part within `margin` relevancy of the winner.
TargetLevel classify_level(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                           const Scored& preliminary, double margin = kAutoPartMargin);

struct ResolveOptions {
  LevelClassifier classifier;  // empty = classify_level with the default margin
  // Text embedder for parent labels used as the extra Step 2 canonical; when
  // empty or the parent has no label, its image embedding is used.
  std::function<Embedding(const std::string&)> embed_label;
};

TargetLevel query_level(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                        const Scored& preliminary, const ResolveOptions& options = {});

// Two-step multilevel resolution starting from `preliminary`.
Resolved resolve_target(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                        const Scored& preliminary, const ResolveOptions& options = {});

// Same, with the query level already decided.
Resolved resolve_at_level(const semantic::MappingDictionary& dict, const Query& query, const RelevancyContext& ctx,
                          const Scored& preliminary, TargetLevel level, const ResolveOptions& options = {});

// Up to k distinct resolved targets: every record in rank order is resolved
// as a preliminary at the level of the overall winner, duplicates dropped,
// then sorted by descending relevancy with ties by ascending id. Throws
// InvalidInput for k < 1.
std::vector<Resolved> top_k_query(const semantic::MappingDictionary& dict, const Query& query,
                                  const RelevancyContext& ctx, int k, const ResolveOptions& options = {});

}  // namespace mlfield::query
