#include "mlfield/semantic/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/common/png.hpp"

namespace mlfield::semantic {
namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kNoLabel = 0xFFFFFFFFu;

std::vector<std::uint8_t> mask_tile_png(const mask::CandidateMask& m) {
  return encode_mask_png(m.pixels);
}

}  // namespace

const TargetRecord* MappingDictionary::find(std::uint32_t id) const {
  auto it = records.find(id);
  return it == records.end() ? nullptr : &it->second;
}

const TargetRecord& MappingDictionary::at(std::uint32_t id) const {
  if (const auto* r = find(id)) return *r;
  throw NotFound("no target with id " + std::to_string(id) + " in the mapping dictionary");
}

std::vector<std::uint32_t> MappingDictionary::object_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& [id, r] : records)
    if (r.level == TargetLevel::Object) out.push_back(id);
  return out;
}

std::vector<std::uint32_t> MappingDictionary::part_ids_of(std::uint32_t object_id) const {
  std::vector<std::uint32_t> out;
  for (const auto& [id, r] : records)
    if (r.level == TargetLevel::Part && r.parent_id == object_id) out.push_back(id);
  return out;
}

CodeBook MappingDictionary::codebook() const {
  CodeBook book(lattice, tolerance);
  for (const auto& [id, r] : records) book.add(id, r.code);
  return book;
}

std::size_t MappingDictionary::embedding_dim() const {
  return records.empty() ? 0 : records.begin()->second.raw_embedding.dim();
}

void MappingDictionary::validate() const {
  const auto dim = embedding_dim();
  for (const auto& [id, r] : records) {
    if (r.id != id) throw InvariantViolation("record key does not match its id " + std::to_string(r.id));
    if (id == 0) throw InvariantViolation("id 0 is reserved for background");
    if (r.raw_embedding.dim() != dim || r.effective_embedding.dim() != dim)
      throw InvariantViolation("record " + std::to_string(id) + " has a different embedding dimension");
    if (r.code.is_background()) throw InvariantViolation("record " + std::to_string(id) + " uses the background code");
    if (r.level == TargetLevel::Object) {
      if (r.parent_id) throw InvariantViolation("object " + std::to_string(id) + " has a parent");
      if (r.effective_embedding != r.raw_embedding)
        throw InvariantViolation("object " + std::to_string(id) + " effective embedding differs from raw");
    } else {
      if (!r.parent_id) throw InvariantViolation("part " + std::to_string(id) + " has no parent");
      const auto* p = find(*r.parent_id);
      if (!p || p->level != TargetLevel::Object)
        throw InvariantViolation("part " + std::to_string(id) + " refers to missing object " +
                                 std::to_string(*r.parent_id));
    }
  }
  // Separation: every pair differs by more than 2t on some channel.
  std::vector<const TargetRecord*> all;
  for (const auto& [id, r] : records) all.push_back(&r);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      double linf = 0.0;
      for (int c = 0; c < 3; ++c)
        linf = std::max(linf, std::abs(double(all[i]->code.components[c]) - all[j]->code.components[c]));
      if (!(linf > 2.0 * tolerance))
        throw InvariantViolation("codes of " + std::to_string(all[i]->id) + " and " + std::to_string(all[j]->id) +
                                 " are closer than twice the tolerance");
    }
}

MappingDictionary build_mapping_dictionary(const mask::Hierarchy& hierarchy, std::span<const EmbeddingRecord> embeddings,
                                           double w, double t) {
  if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("reserving weight must lie in [0, 1]");
  std::map<std::pair<std::uint32_t, std::uint8_t>, const Embedding*> by_key;
  std::set<std::uint32_t> seen_ids;
  for (const auto& e : embeddings) {
    if (!seen_ids.insert(e.id).second) throw InvalidInput("duplicate embedding for id " + std::to_string(e.id));
    by_key[{e.id, e.level}] = &e.embedding;
  }
  auto lookup = [&](std::uint32_t id, TargetLevel level) -> const Embedding& {
    auto it = by_key.find({id, static_cast<std::uint8_t>(level)});
    if (it == by_key.end())
      throw NotFound("missing embedding for " + std::string(to_string(level)) + " " + std::to_string(id));
    return *it->second;
  };

  MappingDictionary dict;
  dict.reserving_weight = w;
  dict.tolerance = t;
  const std::size_t n = hierarchy.objects.size() + hierarchy.parts.size();
  dict.lattice = lattice_for(n, t);

  std::set<std::uint32_t> target_ids;
  for (const auto& o : hierarchy.objects) {
    if (!target_ids.insert(o.target_id).second)
      throw InvalidInput("duplicate target id " + std::to_string(o.target_id));
    TargetRecord r;
    r.id = o.target_id;
    r.level = TargetLevel::Object;
    r.raw_embedding = normalize(lookup(o.target_id, TargetLevel::Object));
    r.effective_embedding = r.raw_embedding;
    r.label = o.label;
    dict.records[r.id] = std::move(r);
  }
  for (const auto& p : hierarchy.parts) {
    if (!target_ids.insert(p.target_id).second)
      throw InvalidInput("duplicate target id " + std::to_string(p.target_id));
    const auto& parent = hierarchy.objects.at(p.object_index);
    TargetRecord r;
    r.id = p.target_id;
    r.level = TargetLevel::Part;
    r.parent_id = parent.target_id;
    r.raw_embedding = normalize(lookup(p.target_id, TargetLevel::Part));
    r.effective_embedding = deviate(dict.records.at(parent.target_id).raw_embedding, r.raw_embedding, w);
    r.label = p.label;
    dict.records[r.id] = std::move(r);
  }

  const auto codes = assign_codes(n, t);
  std::size_t i = 0;
  for (auto& [id, r] : dict.records) r.code = codes[i++];
  dict.validate();
  return dict;
}

std::vector<EmbeddingRecord> embed_hierarchy(const mask::Hierarchy& hierarchy, const EmbeddingProvider& provider) {
  std::vector<EmbeddingRecord> out;
  const std::string frame = std::to_string(hierarchy.frame_id);
  for (const auto& o : hierarchy.objects) {
    TargetContent c{o.target_id, TargetLevel::Object, frame + "/o" + std::to_string(o.target_id), o.label,
                    mask_tile_png(o.mask)};
    out.push_back({o.target_id, 0, provider.embed_target(c)});
  }
  for (const auto& p : hierarchy.parts) {
    TargetContent c{p.target_id, TargetLevel::Part, frame + "/p" + std::to_string(p.target_id), p.label,
                    mask_tile_png(p.mask)};
    out.push_back({p.target_id, 1, provider.embed_target(c)});
  }
  return out;
}

std::vector<std::uint8_t> serialize_dictionary(const MappingDictionary& dict) {
  const auto dim = dict.embedding_dim();
  BinaryWriter out;
  out.put_bytes("MLFD");
  out.put(kVersion);
  out.put(static_cast<std::uint32_t>(dim));
  out.put(static_cast<std::uint32_t>(dict.records.size()));
  out.put(dict.reserving_weight);
  out.put(dict.tolerance);
  out.put(static_cast<std::uint32_t>(dict.lattice.side));
  out.put(dict.lattice.spacing);
  for (const auto& [id, r] : dict.records) {
    out.put(id);
    out.put(static_cast<std::uint8_t>(r.level));
    out.put(r.parent_id.value_or(0u));
    out.put_span(std::span<const float>(r.code.components));
    if (r.label) {
      out.put(static_cast<std::uint32_t>(r.label->size()));
      out.put_bytes(*r.label);
    } else {
      out.put(kNoLabel);
    }
    out.put_span(std::span<const float>(r.raw_embedding.values));
  }
  return std::move(out).bytes();
}

MappingDictionary deserialize_dictionary(std::span<const std::uint8_t> bytes) {
  BinaryReader in(bytes);
  in.expect_magic("MLFD");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported dictionary version " + std::to_string(version));
  const auto dim = in.get<std::uint32_t>();
  const auto count = in.get<std::uint32_t>();
  MappingDictionary dict;
  dict.reserving_weight = in.get<double>();
  dict.tolerance = in.get<double>();
  dict.lattice.side = static_cast<int>(in.get<std::uint32_t>());
  dict.lattice.spacing = in.get<double>();
  for (std::uint32_t i = 0; i < count; ++i) {
    TargetRecord r;
    r.id = in.get<std::uint32_t>();
    const auto level = in.get<std::uint8_t>();
    if (level > 1) throw FormatError("bad target level " + std::to_string(level));
    r.level = static_cast<TargetLevel>(level);
    const auto parent = in.get<std::uint32_t>();
    if (parent != 0) r.parent_id = parent;
    in.get_span(std::span<float>(r.code.components));
    const auto label_len = in.get<std::uint32_t>();
    if (label_len != kNoLabel) r.label = in.get_string(label_len);
    r.raw_embedding.values.resize(dim);
    in.get_span(std::span<float>(r.raw_embedding.values));
    r.raw_embedding.normalized = true;
    if (!dict.records.emplace(r.id, std::move(r)).second) throw FormatError("duplicate id in dictionary file");
  }
  if (!in.at_end()) throw FormatError("trailing bytes after dictionary records");
  for (auto& [id, r] : dict.records) {
    if (r.level == TargetLevel::Object) {
      r.effective_embedding = r.raw_embedding;
    } else {
      const auto* parent = r.parent_id ? dict.find(*r.parent_id) : nullptr;
      if (!parent) throw FormatError("part " + std::to_string(id) + " refers to a missing object");
      r.effective_embedding = deviate(parent->raw_embedding, r.raw_embedding, dict.reserving_weight);
    }
  }
  try {
    dict.validate();
  } catch (const InvariantViolation& e) {
    throw FormatError(std::string("dictionary file is inconsistent: ") + e.what());
  }
  return dict;
}

void write_dictionary(const std::filesystem::path& path, const MappingDictionary& dict) {
  write_file_bytes(path, serialize_dictionary(dict));
}

MappingDictionary read_dictionary(const std::filesystem::path& path) {
  return deserialize_dictionary(read_file_bytes(path));
}

}  // namespace mlfield::semantic
