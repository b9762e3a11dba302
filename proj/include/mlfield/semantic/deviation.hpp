#pragma once

#include <vector>

#include "mlfield/semantic/embedding.hpp"

namespace mlfield::semantic {

inline constexpr double kDefaultReservingWeight = 0.7;

// (1 - w) * object + w * part, before normalization.
std::vector<double> deviate_unnormalized(const Embedding& object, const Embedding& part, double w);

// Deviated part embedding: the convex blend above renormalized to unit length.
// w = 0 returns the object embedding, w = 1 the part embedding. Throws
// InvalidInput for w outside [0, 1] or mismatched dimensions and
// DegenerateInput when the blend vanishes.
Embedding deviate(const Embedding& object, const Embedding& part, double w = kDefaultReservingWeight);

}  // namespace mlfield::semantic
