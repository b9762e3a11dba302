#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlfield/agent/agent.hpp"
#include "mlfield/common/png.hpp"
#include "mlfield/service/config.hpp"

namespace mlfield::service {

// Everything a session needs from disk. Loaded once per scene and shared
// read-only by all sessions on it.
struct SceneAssets {
  std::string name;
  std::shared_ptr<const field::Scene> scene;
  std::shared_ptr<const semantic::MappingDictionary> dictionary;
  std::shared_ptr<const nav::KeypointGraph> graph;
  std::vector<field::CameraPose> cameras;
};

// Throws NotFound naming the first missing file, FormatError for corrupt ones.
SceneAssets load_assets(const std::string& name, const ScenePaths& paths);

// Object-level features as RGB (channels clamped to [0, 1]).
Image8 visualize(const FeatureImage& features);
// Blends mask pixels 50/50 with red.
void overlay_mask(Image8& image, const BinaryRaster& mask);

// Stream message: seq u32 LE, total u32 LE, PNG bytes.
using StreamMessage = std::shared_ptr<const std::vector<std::uint8_t>>;
StreamMessage encode_stream_message(std::uint32_t seq, std::uint32_t total, std::span<const std::uint8_t> png);
struct DecodedStreamMessage {
  std::uint32_t seq = 0;
  std::uint32_t total = 0;
  std::vector<std::uint8_t> png;
};
// Throws FormatError on a short message.
DecodedStreamMessage decode_stream_message(std::span<const std::uint8_t> bytes);

// Ordered queue between a session and one stream consumer.
class FrameChannel {
 public:
  void push(StreamMessage m);
  void close();
  // Called (outside the lock) after every push and on close.
  void set_notify(std::function<void()> fn);
  std::optional<StreamMessage> try_pop();
  // Blocks until a message arrives or the channel closes (then nullopt).
  std::optional<StreamMessage> pop(std::chrono::milliseconds timeout);
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<StreamMessage> queue_;
  bool closed_ = false;
  std::function<void()> notify_;
};

// FIFO lock: waiters are served in the order they called lock().
class TicketLock {
 public:
  void lock();
  void unlock();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t next_ = 0;
  std::uint64_t serving_ = 0;
};

class Session {
 public:
  Session(std::string id, std::shared_ptr<const SceneAssets> assets,
          std::shared_ptr<const semantic::EmbeddingProvider> provider, const ServiceConfig& config);
  ~Session();

  const std::string& id() const { return id_; }
  const SceneAssets& assets() const { return *assets_; }

  // All state access goes through a turn; turns are granted in arrival order.
  std::unique_lock<TicketLock> turn() { return std::unique_lock<TicketLock>(lock_); }

  // The operations below require the caller to hold a turn.
  nlohmann::json chat(const std::string& text);
  nlohmann::json query(const std::string& text, query::LevelHint hint, int k);
  nlohmann::json move(nav::Direction direction, double distance);
  std::vector<std::uint8_t> frame(bool overlay);
  const field::CameraPose& pose() const { return env_->pose(); }
  const std::vector<agent::TaskState>& tasks() const { return tasks_; }
  std::uint64_t query_cache_hits() const { return cache_hits_; }

  // New consumer; it first receives the most recent frame sequence, if any.
  // Thread-safe without a turn.
  std::shared_ptr<FrameChannel> subscribe();

  void touch();
  std::chrono::steady_clock::time_point last_active() const;
  std::chrono::system_clock::time_point created() const { return created_; }

 private:
  void publish(int seq, int total, const field::CameraPose& pose);

  std::string id_;
  std::shared_ptr<const SceneAssets> assets_;
  std::unique_ptr<agent::SceneEnvironment> env_;
  std::unique_ptr<agent::DecisionModel> model_;
  agent::SafetyPolicy policy_;
  std::vector<agent::TaskState> tasks_;
  int top_k_default_;
  TicketLock lock_;

  // last query mask and the pose it belongs to
  std::optional<std::pair<field::CameraPose, BinaryRaster>> last_mask_;
  // query results at the cached pose
  std::optional<field::CameraPose> cache_pose_;
  std::map<std::string, std::pair<nlohmann::json, std::optional<BinaryRaster>>> query_cache_;
  std::uint64_t cache_hits_ = 0;

  mutable std::mutex stream_mu_;
  std::vector<std::weak_ptr<FrameChannel>> subscribers_;
  std::vector<StreamMessage> last_sequence_;

  mutable std::mutex time_mu_;
  std::chrono::steady_clock::time_point last_active_;
  std::chrono::system_clock::time_point created_;
};

// Session registry and asset cache. Thread-safe.
class Service {
 public:
  // Provider built from config.embedding unless given.
  explicit Service(ServiceConfig config, std::shared_ptr<const semantic::EmbeddingProvider> provider = nullptr);

  const ServiceConfig& config() const { return config_; }

  // Default scene when `scene` is empty. Throws NotFound for unknown scenes
  // or missing artifacts.
  std::shared_ptr<Session> create_session(const std::string& scene = {});
  // Throws NotFound.
  std::shared_ptr<Session> find(const std::string& id);
  std::size_t session_count() const;
  // Drops sessions idle longer than the configured timeout; returns how many.
  std::size_t expire_idle(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now());
  std::shared_ptr<const SceneAssets> assets(const std::string& scene);

 private:
  ServiceConfig config_;
  std::shared_ptr<const semantic::EmbeddingProvider> provider_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<const SceneAssets>> assets_;
  std::uint64_t id_state_;
};

}  // namespace mlfield::service
