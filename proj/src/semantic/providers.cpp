#include "mlfield/semantic/providers.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include <httplib.h>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/common/hash.hpp"

namespace mlfield::semantic {
namespace {

const std::set<std::string, std::less<>>& stop_words() {
  static const std::set<std::string, std::less<>> words = {"a",  "an", "the", "of", "on",  "in",
                                                           "at", "to", "and", "with", "its", "for"};
  return words;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty() && !stop_words().count(current)) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80)
      current.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return tokens;
}

Embedding from_f32_bytes(std::string_view body, std::size_t dim) {
  if (body.size() != dim * sizeof(float))
    throw ProviderError("provider returned " + std::to_string(body.size()) + " bytes, expected " +
                        std::to_string(dim * sizeof(float)));
  std::vector<double> values(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    float f;
    std::memcpy(&f, body.data() + i * sizeof(float), sizeof(float));
    values[i] = f;
  }
  return normalize(values);
}

}  // namespace

SyntheticProvider::SyntheticProvider(std::uint64_t seed, std::size_t dim, double identity_weight)
    : seed_(seed), dim_(dim), identity_weight_(identity_weight) {
  if (dim == 0) throw InvalidInput("embedding dimension must be positive");
}

std::vector<double> SyntheticProvider::hashed_direction(std::string_view key) const {
  std::mt19937_64 rng(fnv1a64(key, 0xcbf29ce484222325ull ^ (seed_ * 0x9e3779b97f4a7c15ull)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim_);
  double sq = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    sq += x * x;
  }
  const double n = std::sqrt(sq);
  for (auto& x : v) x /= n;
  return v;
}

std::vector<double> SyntheticProvider::bag_of_words(std::string_view text) const {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return hashed_direction("text:" + std::string(text));
  std::vector<double> sum(dim_, 0.0);
  for (const auto& t : tokens) {
    const auto d = hashed_direction("word:" + t);
    for (std::size_t i = 0; i < dim_; ++i) sum[i] += d[i];
  }
  return sum;
}

Embedding SyntheticProvider::embed_text(std::string_view text) const { return normalize(bag_of_words(text)); }

Embedding SyntheticProvider::embed_target(const TargetContent& content) const {
  std::string identity = "tile:" + content.key;
  if (!content.tile.empty()) {
    identity += ':';
    identity += std::to_string(
        fnv1a64(std::string_view(reinterpret_cast<const char*>(content.tile.data()), content.tile.size())));
  }
  if (!content.label) return normalize(hashed_direction(identity));
  auto v = normalize(bag_of_words(*content.label));
  const auto noise = hashed_direction(identity);
  std::vector<double> mixed(dim_);
  for (std::size_t i = 0; i < dim_; ++i) mixed[i] = v.values[i] + identity_weight_ * noise[i];
  return normalize(mixed);
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path, std::size_t dim) {
  const auto bytes = read_file_bytes(path);
  const std::size_t record_size = 5 + dim * sizeof(float);
  if (bytes.size() % record_size != 0)
    throw FormatError(path.string() + ": size is not a multiple of the " + std::to_string(record_size) +
                      "-byte record for dimension " + std::to_string(dim));
  BinaryReader in(bytes);
  std::vector<EmbeddingRecord> out;
  while (!in.at_end()) {
    EmbeddingRecord r;
    r.id = in.get<std::uint32_t>();
    r.level = in.get<std::uint8_t>();
    r.embedding.values.resize(dim);
    in.get_span(std::span<float>(r.embedding.values));
    out.push_back(std::move(r));
  }
  return out;
}

void write_embedding_file(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
  BinaryWriter w;
  for (const auto& r : records) {
    w.put(r.id);
    w.put(r.level);
    w.put_span(std::span<const float>(r.embedding.values));
  }
  write_file_bytes(path, w.bytes());
}

FileProvider::FileProvider(const std::filesystem::path& path, std::size_t dim) : dim_(dim) {
  index(read_embedding_file(path, dim));
}

FileProvider::FileProvider(const std::vector<EmbeddingRecord>& records) {
  dim_ = records.empty() ? kDefaultEmbeddingDim : records.front().embedding.dim();
  index(records);
}

void FileProvider::index(const std::vector<EmbeddingRecord>& records) {
  for (const auto& r : records) {
    if (r.embedding.dim() != dim_) throw FormatError("embedding record has inconsistent dimension");
    table_[{r.id, r.level}] = r.embedding;
  }
}

Embedding FileProvider::embed_target(const TargetContent& content) const {
  auto it = table_.find({content.id, static_cast<std::uint8_t>(content.level)});
  if (it == table_.end())
    throw NotFound("no precomputed embedding for " + std::string(to_string(content.level)) + " " +
                   std::to_string(content.id));
  return normalize(it->second);
}

Embedding FileProvider::embed_text(std::string_view text) const {
  auto it = table_.find({fnv1a32(text), kTextLevelByte});
  if (it == table_.end()) throw NotFound("no precomputed text embedding for \"" + std::string(text) + "\"");
  return normalize(it->second);
}

HttpProvider::HttpProvider(std::string url, std::size_t dim, int timeout_seconds)
    : dim_(dim), timeout_seconds_(timeout_seconds) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("provider URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

Embedding HttpProvider::post(const std::string& body, const std::string& content_type,
                             const std::vector<std::pair<std::string, std::string>>& headers) const {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(path_, h, body, content_type);
  if (!res) throw ProviderError("embedding provider unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw ProviderError("embedding provider returned HTTP " + std::to_string(res->status));
  return from_f32_bytes(res->body, dim_);
}

Embedding HttpProvider::embed_target(const TargetContent& content) const {
  return post(std::string(content.tile.begin(), content.tile.end()), "application/octet-stream",
              {{"X-Target-Id", std::to_string(content.id)}, {"X-Target-Level", to_string(content.level)}});
}

Embedding HttpProvider::embed_text(std::string_view text) const {
  return post(std::string(text), "text/plain; charset=utf-8", {});
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderSpec& spec) {
  if (spec.mode == "synthetic") return std::make_unique<SyntheticProvider>(spec.seed, spec.dim);
  if (spec.mode == "file") return std::make_unique<FileProvider>(spec.location, spec.dim);
  if (spec.mode == "http") return std::make_unique<HttpProvider>(spec.location, spec.dim);
  throw InvalidInput("unknown embedding provider mode '" + spec.mode + "'");
}

}  // namespace mlfield::semantic
