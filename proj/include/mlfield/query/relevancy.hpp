#pragma once

#include <span>
#include <string>
#include <vector>

#include "mlfield/semantic/embedding.hpp"
#include "mlfield/semantic/providers.hpp"

namespace mlfield::query {

using semantic::Embedding;

inline const std::vector<std::string> kDefaultCanonicalPhrases = {"object", "stuff", "texture"};

struct RelevancyContext {
  std::vector<Embedding> canonical_embeddings;
};

// Embeds the default canonical phrases through `provider`.
RelevancyContext default_context(const semantic::EmbeddingProvider& provider);

// min_i exp(q) / (exp(c_i) + exp(q)) from precomputed dots, evaluated as
// 1 / (1 + exp(max_i c_i - q)). Throws InvalidInput on an empty canonical set.
double relevancy_from_dots(double query_dot, std::span<const double> canonical_dots);

// Pairwise-softmax relevancy of an image embedding against a text query,
// taking the least favourable canonical. Throws InvalidInput on dimension
// mismatch, a non-unit embedding or an empty canonical set.
double relevancy(const Embedding& image, const Embedding& query, const RelevancyContext& ctx);

// Checks unit norm (within 1e-4) and a shared dimension.
void check_embeddings(const Embedding& query, const RelevancyContext& ctx);

}  // namespace mlfield::query
