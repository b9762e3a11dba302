#include "mlfield/query/relevancy.hpp"

#include <algorithm>
#include <cmath>

#include "mlfield/common/error.hpp"

namespace mlfield::query {
namespace {

constexpr double kUnitSlack = 1e-4;

void check_unit(const Embedding& e, const char* what) {
  if (std::abs(semantic::norm(e) - 1.0) > kUnitSlack) throw InvalidInput(std::string(what) + " is not unit-norm");
}

}  // namespace

RelevancyContext default_context(const semantic::EmbeddingProvider& provider) {
  RelevancyContext ctx;
  for (const auto& phrase : kDefaultCanonicalPhrases) ctx.canonical_embeddings.push_back(provider.embed_text(phrase));
  return ctx;
}

double relevancy_from_dots(double query_dot, std::span<const double> canonical_dots) {
  if (canonical_dots.empty()) throw InvalidInput("relevancy needs at least one canonical embedding");
  const double worst = *std::max_element(canonical_dots.begin(), canonical_dots.end());
  return 1.0 / (1.0 + std::exp(worst - query_dot));
}

void check_embeddings(const Embedding& query, const RelevancyContext& ctx) {
  if (ctx.canonical_embeddings.empty()) throw InvalidInput("relevancy needs at least one canonical embedding");
  check_unit(query, "query embedding");
  for (const auto& c : ctx.canonical_embeddings) {
    if (c.dim() != query.dim()) throw InvalidInput("canonical embedding dimension differs from the query");
    check_unit(c, "canonical embedding");
  }
}

double relevancy(const Embedding& image, const Embedding& query, const RelevancyContext& ctx) {
  check_embeddings(query, ctx);
  if (image.dim() != query.dim()) throw InvalidInput("image embedding dimension differs from the query");
  check_unit(image, "image embedding");
  std::vector<double> dots;
  dots.reserve(ctx.canonical_embeddings.size());
  for (const auto& c : ctx.canonical_embeddings) dots.push_back(semantic::dot(image, c));
  return relevancy_from_dots(semantic::dot(image, query), dots);
}

}  // namespace mlfield::query
