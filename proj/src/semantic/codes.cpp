#include "mlfield/semantic/codes.hpp"

#include <cmath>
#include <sstream>

#include "mlfield/common/error.hpp"

namespace mlfield::semantic {

LowDimCode CodeLattice::code_at(int i, int j, int k) const {
  return {{static_cast<float>(i * spacing), static_cast<float>(j * spacing), static_cast<float>(k * spacing)}};
}

CodeLattice lattice_for(std::size_t n_targets, double tolerance) {
  if (!(tolerance > 0.0)) throw InvalidInput("channel tolerance must be positive");
  int side = 2;
  while (static_cast<std::int64_t>(side) * side * side - 1 < static_cast<std::int64_t>(n_targets)) ++side;
  const double spacing = 1.0 / (side - 1);
  // Small slack so that e.g. t = 0.025 still admits the 0.1 lattice.
  if (spacing < 4.0 * tolerance * (1.0 - 1e-12)) {
    const int max_side = static_cast<int>(std::floor(1.0 / (4.0 * tolerance) + 1e-9)) + 1;
    std::ostringstream msg;
    msg << n_targets << " targets need a lattice of side " << side << " (spacing " << spacing
        << ") but tolerance " << tolerance << " requires spacing >= " << 4.0 * tolerance << "; capacity is "
        << static_cast<std::int64_t>(max_side) * max_side * max_side - 1 << " codes. Use a smaller tolerance.";
    throw CapacityExceeded(msg.str());
  }
  return {side, spacing};
}

std::vector<LowDimCode> assign_codes(std::size_t n_targets, double tolerance) {
  const auto lattice = lattice_for(n_targets, tolerance);
  std::vector<LowDimCode> out;
  out.reserve(n_targets);
  for (int i = 0; i < lattice.side && out.size() < n_targets; ++i)
    for (int j = 0; j < lattice.side && out.size() < n_targets; ++j)
      for (int k = 0; k < lattice.side && out.size() < n_targets; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        out.push_back(lattice.code_at(i, j, k));
      }
  return out;
}

namespace {

std::int64_t lattice_key(int i, int j, int k, int side) {
  return (static_cast<std::int64_t>(i) * side + j) * side + k;
}

}  // namespace

CodeBook::CodeBook(CodeLattice lattice, double tolerance) : lattice_(lattice), tolerance_(tolerance) {}

void CodeBook::add(std::uint32_t id, const LowDimCode& code) {
  int idx[3];
  for (int c = 0; c < 3; ++c) idx[c] = static_cast<int>(std::lround(code.components[c] / lattice_.spacing));
  const auto key = lattice_key(idx[0], idx[1], idx[2], lattice_.side);
  if (ids_.count(key)) throw InvalidInput("duplicate code in codebook");
  ids_[key] = id;
  codes_[key] = code;
}

std::optional<std::uint32_t> CodeBook::decode(std::span<const double, 3> value) const {
  int idx[3];
  for (int c = 0; c < 3; ++c) {
    const long r = std::lround(value[c] / lattice_.spacing);
    if (r < 0 || r >= lattice_.side) return std::nullopt;
    idx[c] = static_cast<int>(r);
  }
  const bool background = idx[0] == 0 && idx[1] == 0 && idx[2] == 0;
  const auto key = lattice_key(idx[0], idx[1], idx[2], lattice_.side);
  LowDimCode code;
  if (background) {
    code = LowDimCode{};
  } else {
    auto it = codes_.find(key);
    if (it == codes_.end()) return std::nullopt;
    code = it->second;
  }
  for (int c = 0; c < 3; ++c)
    if (std::abs(value[c] - static_cast<double>(code.components[c])) > tolerance_) return std::nullopt;
  return background ? 0u : ids_.at(key);
}

}  // namespace mlfield::semantic
