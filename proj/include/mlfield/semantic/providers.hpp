#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlfield/semantic/embedding.hpp"
#include "mlfield/semantic/identity.hpp"

namespace mlfield::semantic {

// What is known about a target when its image embedding is requested.
struct TargetContent {
  std::uint32_t id = 0;
  TargetLevel level = TargetLevel::Object;
  std::string key;                   // stable content identity, e.g. "frame0/object3"
  std::optional<std::string> label;  // free-text label, when the corpus carries one
  std::vector<std::uint8_t> tile;    // encoded image tile (may be empty)
};

// Boundary to the vision-language encoder. Implementations return unit-norm
// embeddings and are safe to call concurrently.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual Embedding embed_target(const TargetContent& content) const = 0;
  virtual Embedding embed_text(std::string_view text) const = 0;
};

// Deterministic stand-in for a real encoder. Text is embedded as a normalized
// bag of per-word hashed directions; targets with a label embed like their
// label plus a hashed identity component, unlabeled targets as a pure hash of
// their content identity.
class SyntheticProvider final : public EmbeddingProvider {
 public:
  explicit SyntheticProvider(std::uint64_t seed = 0, std::size_t dim = kDefaultEmbeddingDim,
                             double identity_weight = 0.35);

  std::size_t dim() const override { return dim_; }
  Embedding embed_target(const TargetContent& content) const override;
  Embedding embed_text(std::string_view text) const override;

  // Unit vector derived from a seeded hash of `key`.
  std::vector<double> hashed_direction(std::string_view key) const;

 private:
  std::vector<double> bag_of_words(std::string_view text) const;

  std::uint64_t seed_;
  std::size_t dim_;
  double identity_weight_;
};

// Record of the binary embedding file: id:u32, level:u8, dim x f32, little-endian,
// no header. Level byte 2 marks a text embedding whose id is the FNV-1a 32-bit
// hash of the UTF-8 text.
inline constexpr std::uint8_t kTextLevelByte = 2;

struct EmbeddingRecord {
  std::uint32_t id = 0;
  std::uint8_t level = 0;
  Embedding embedding;
};

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path, std::size_t dim);
void write_embedding_file(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);

// Serves precomputed embeddings; lookups are renormalized. Missing entries throw NotFound.
class FileProvider final : public EmbeddingProvider {
 public:
  FileProvider(const std::filesystem::path& path, std::size_t dim = kDefaultEmbeddingDim);
  explicit FileProvider(const std::vector<EmbeddingRecord>& records);

  std::size_t dim() const override { return dim_; }
  Embedding embed_target(const TargetContent& content) const override;
  Embedding embed_text(std::string_view text) const override;

 private:
  void index(const std::vector<EmbeddingRecord>& records);

  std::size_t dim_ = 0;
  std::map<std::pair<std::uint32_t, std::uint8_t>, Embedding> table_;
};

// POSTs tile bytes (application/octet-stream, with X-Target-Id / X-Target-Level
// headers) or UTF-8 text (text/plain) to one endpoint; the response body is
// dim little-endian float32 values. Failures throw ProviderError.
class HttpProvider final : public EmbeddingProvider {
 public:
  HttpProvider(std::string url, std::size_t dim = kDefaultEmbeddingDim, int timeout_seconds = 10);

  std::size_t dim() const override { return dim_; }
  Embedding embed_target(const TargetContent& content) const override;
  Embedding embed_text(std::string_view text) const override;

 private:
  Embedding post(const std::string& body, const std::string& content_type,
                 const std::vector<std::pair<std::string, std::string>>& headers) const;

  std::string scheme_host_port_;
  std::string path_;
  std::size_t dim_;
  int timeout_seconds_;
};

struct ProviderSpec {
  std::string mode = "synthetic";  // synthetic | file | http
  std::string location;            // file path or URL
  std::uint64_t seed = 0;
  std::size_t dim = kDefaultEmbeddingDim;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec);

}  // namespace mlfield::semantic
