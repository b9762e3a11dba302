#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace mlfield::semantic {

inline constexpr double kDefaultTolerance = 0.02;

// Three-component stand-in feature trained into the Gaussians. (0, 0, 0) is
// reserved for background and never assigned to a target.
struct LowDimCode {
  std::array<float, 3> components{};

  bool is_background() const { return components[0] == 0.f && components[1] == 0.f && components[2] == 0.f; }
  friend bool operator==(const LowDimCode&, const LowDimCode&) = default;
};

// Uniform lattice {0, s, 2s, ..., 1}^3 with `side` points per axis.
struct CodeLattice {
  int side = 2;
  double spacing = 1.0;

  std::int64_t capacity() const { return static_cast<std::int64_t>(side) * side * side - 1; }
  LowDimCode code_at(int i, int j, int k) const;

  friend bool operator==(const CodeLattice&, const CodeLattice&) = default;
};

// Widest lattice that still holds n targets; throws CapacityExceeded when its
// spacing would fall below 4t (tolerance bands would then touch).
CodeLattice lattice_for(std::size_t n_targets, double tolerance);

// n distinct non-background codes in lexicographic (i, j, k) lattice order.
std::vector<LowDimCode> assign_codes(std::size_t n_targets, double tolerance);

// Code -> identity lookup used to decode rendered feature pixels.
class CodeBook {
 public:
  CodeBook(CodeLattice lattice, double tolerance);

  void add(std::uint32_t id, const LowDimCode& code);

  // Id whose code lies within the tolerance band on every channel; 0 for the
  // background code; std::nullopt when the value matches no code.
  std::optional<std::uint32_t> decode(std::span<const double, 3> value) const;

  double tolerance() const { return tolerance_; }

 private:
  CodeLattice lattice_;
  double tolerance_;
  std::unordered_map<std::int64_t, std::uint32_t> ids_;
  std::unordered_map<std::int64_t, LowDimCode> codes_;
};

}  // namespace mlfield::semantic
