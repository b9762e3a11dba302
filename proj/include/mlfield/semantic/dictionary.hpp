#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlfield/mask/hierarchy.hpp"
#include "mlfield/semantic/codes.hpp"
#include "mlfield/semantic/deviation.hpp"
#include "mlfield/semantic/embedding.hpp"
#include "mlfield/semantic/identity.hpp"
#include "mlfield/semantic/providers.hpp"

namespace mlfield::semantic {

struct TargetRecord {
  std::uint32_t id = 0;
  TargetLevel level = TargetLevel::Object;
  std::optional<std::uint32_t> parent_id;
  Embedding raw_embedding;
  Embedding effective_embedding;  // raw for objects, deviated for parts
  LowDimCode code;
  std::optional<std::string> label;

  friend bool operator==(const TargetRecord&, const TargetRecord&) = default;
};

struct MappingDictionary {
  std::map<std::uint32_t, TargetRecord> records;
  double reserving_weight = kDefaultReservingWeight;
  double tolerance = kDefaultTolerance;
  CodeLattice lattice;

  const TargetRecord* find(std::uint32_t id) const;
  // Throws NotFound.
  const TargetRecord& at(std::uint32_t id) const;

  std::vector<std::uint32_t> object_ids() const;
  std::vector<std::uint32_t> part_ids_of(std::uint32_t object_id) const;

  CodeBook codebook() const;
  std::size_t embedding_dim() const;

  // Throws InvariantViolation when ids, parents, levels or code separation are broken.
  void validate() const;

  friend bool operator==(const MappingDictionary&, const MappingDictionary&) = default;
};

// One raw embedding per hierarchy target, matched by (id, level). Errors:
// InvalidInput on duplicate ids, NotFound on a missing embedding.
MappingDictionary build_mapping_dictionary(const mask::Hierarchy& hierarchy, std::span<const EmbeddingRecord> embeddings,
                                           double w = kDefaultReservingWeight, double t = kDefaultTolerance);

// Embeds every hierarchy target through `provider`, keyed "<frame>/o<id>" or
// "<frame>/p<id>" with the hierarchy label. Tiles are the target's mask encoded as PNG.
std::vector<EmbeddingRecord> embed_hierarchy(const mask::Hierarchy& hierarchy, const EmbeddingProvider& provider);

// Byte layout (little-endian):
//   "MLFD" u32 version(=1) u32 dim u32 count f64 w f64 t u32 lattice_side f64 lattice_spacing
//   per record, ascending id:
//     u32 id, u8 level, u32 parent_id (0 = none), 3 x f32 code,
//     u32 label_len (0xFFFFFFFF = no label), label bytes, dim x f32 raw embedding
// Effective part embeddings are not stored; they are recomputed from the raw
// embeddings and w on load, which is deterministic and keeps the file small.
std::vector<std::uint8_t> serialize_dictionary(const MappingDictionary& dict);
MappingDictionary deserialize_dictionary(std::span<const std::uint8_t> bytes);

void write_dictionary(const std::filesystem::path& path, const MappingDictionary& dict);
MappingDictionary read_dictionary(const std::filesystem::path& path);

}  // namespace mlfield::semantic
