#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mlfield::semantic {

inline constexpr std::size_t kDefaultEmbeddingDim = 512;

// Language/image embedding vector. Stored in single precision (the on-disk
// precision); arithmetic on embeddings is carried out in double.
struct Embedding {
  std::vector<float> values;
  bool normalized = false;

  std::size_t dim() const { return values.size(); }

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

double dot(const Embedding& a, const Embedding& b);
double norm(const Embedding& e);

// Scales to unit L2 norm; throws DegenerateInput on a zero vector.
Embedding normalize(std::span<const double> values);
Embedding normalize(const Embedding& e);

}  // namespace mlfield::semantic
