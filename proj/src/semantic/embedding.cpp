#include "mlfield/semantic/embedding.hpp"

#include <cmath>

#include "mlfield/common/error.hpp"
#include "mlfield/semantic/deviation.hpp"

namespace mlfield::semantic {

double dot(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw InvalidInput("embedding dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) s += static_cast<double>(a.values[i]) * b.values[i];
  return s;
}

double norm(const Embedding& e) { return std::sqrt(dot(e, e)); }

Embedding normalize(std::span<const double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  const double n = std::sqrt(sq);
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateInput("cannot normalize a zero or non-finite embedding");
  Embedding out;
  out.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<float>(values[i] / n);
  out.normalized = true;
  return out;
}

Embedding normalize(const Embedding& e) {
  std::vector<double> v(e.values.begin(), e.values.end());
  return normalize(v);
}

std::vector<double> deviate_unnormalized(const Embedding& object, const Embedding& part, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("reserving weight must lie in [0, 1]");
  if (object.dim() != part.dim()) throw InvalidInput("embedding dimension mismatch");
  std::vector<double> out(object.dim());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 - w) * static_cast<double>(object.values[i]) + w * static_cast<double>(part.values[i]);
  return out;
}

Embedding deviate(const Embedding& object, const Embedding& part, double w) {
  // The endpoints return the inputs verbatim so w = 0 / w = 1 are exact.
  if (w == 0.0 && object.dim() == part.dim()) return object;
  if (w == 1.0 && object.dim() == part.dim()) return part;
  return normalize(deviate_unnormalized(object, part, w));
}

}  // namespace mlfield::semantic
