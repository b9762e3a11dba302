#include "mlfield/service/session.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/field/render.hpp"
#include "mlfield/mask/rle.hpp"

namespace mlfield::service {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void require_file(const std::filesystem::path& p, const char* what) {
  if (p.empty() || !std::filesystem::is_regular_file(p))
    throw NotFound(std::string(what) + " not found: " + (p.empty() ? std::string("(unset)") : p.string()));
}

std::string query_key(const std::string& text, query::LevelHint hint, int k) {
  return std::string(query::to_string(hint)) + "|" + std::to_string(k) + "|" + text;
}

}  // namespace

SceneAssets load_assets(const std::string& name, const ScenePaths& paths) {
  require_file(paths.scene, "scene");
  require_file(paths.dictionary, "dictionary");
  require_file(paths.graph, "graph");
  require_file(paths.cameras, "cameras");
  SceneAssets a;
  a.name = name;
  a.scene = std::make_shared<const field::Scene>(field::read_scene(paths.scene));
  a.dictionary = std::make_shared<const semantic::MappingDictionary>(semantic::read_dictionary(paths.dictionary));
  a.graph = std::make_shared<const nav::KeypointGraph>(nav::read_graph(paths.graph));
  a.cameras = field::read_cameras(paths.cameras);
  if (a.cameras.empty()) throw InvalidInput("scene " + name + " has no cameras");
  if (a.graph->nodes.empty()) throw InvalidInput("scene " + name + " has an empty keypoint graph");
  return a;
}

Image8 visualize(const FeatureImage& f) {
  Image8 img{f.width(), f.height(), 3, {}};
  img.data.resize(f.pixel_count() * 3);
  std::size_t o = 0;
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      for (int c = 0; c < 3; ++c)
        img.data[o++] = static_cast<std::uint8_t>(std::lround(std::clamp(f.at(x, y, c), 0.0, 1.0) * 255.0));
  return img;
}

void overlay_mask(Image8& img, const BinaryRaster& mask) {
  if (mask.width() != img.width || mask.height() != img.height)
    throw InvalidInput("overlay mask size differs from the frame");
  constexpr int kTint[3] = {255, 0, 0};
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < 3; ++c) {
      auto& v = img.data[p * img.channels + c];
      v = static_cast<std::uint8_t>((v + kTint[c] + 1) / 2);
    }
  }
}

StreamMessage encode_stream_message(std::uint32_t seq, std::uint32_t total, std::span<const std::uint8_t> png) {
  auto out = std::make_shared<std::vector<std::uint8_t>>();
  out->reserve(8 + png.size());
  for (std::uint32_t v : {seq, total})
    for (int b = 0; b < 4; ++b) out->push_back(static_cast<std::uint8_t>(v >> (8 * b)));
  out->insert(out->end(), png.begin(), png.end());
  return out;
}

DecodedStreamMessage decode_stream_message(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError("stream message shorter than its header");
  DecodedStreamMessage m;
  for (int b = 0; b < 4; ++b) {
    m.seq |= std::uint32_t(bytes[b]) << (8 * b);
    m.total |= std::uint32_t(bytes[4 + b]) << (8 * b);
  }
  m.png.assign(bytes.begin() + 8, bytes.end());
  return m;
}

void FrameChannel::push(StreamMessage m) {
  std::function<void()> notify;
  {
    std::lock_guard lk(mu_);
    if (closed_) return;
    queue_.push_back(std::move(m));
    notify = notify_;
  }
  cv_.notify_all();
  if (notify) notify();
}

void FrameChannel::close() {
  std::function<void()> notify;
  {
    std::lock_guard lk(mu_);
    closed_ = true;
    notify = notify_;
  }
  cv_.notify_all();
  if (notify) notify();
}

void FrameChannel::set_notify(std::function<void()> fn) {
  std::lock_guard lk(mu_);
  notify_ = std::move(fn);
}

std::optional<StreamMessage> FrameChannel::try_pop() {
  std::lock_guard lk(mu_);
  if (queue_.empty()) return std::nullopt;
  auto m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

std::optional<StreamMessage> FrameChannel::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, timeout, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  auto m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

bool FrameChannel::closed() const {
  std::lock_guard lk(mu_);
  return closed_;
}

void TicketLock::lock() {
  std::unique_lock lk(mu_);
  const auto ticket = next_++;
  cv_.wait(lk, [&] { return serving_ == ticket; });
}

void TicketLock::unlock() {
  {
    std::lock_guard lk(mu_);
    ++serving_;
  }
  cv_.notify_all();
}

Session::Session(std::string id, std::shared_ptr<const SceneAssets> assets,
                 std::shared_ptr<const semantic::EmbeddingProvider> provider, const ServiceConfig& config)
    : id_(std::move(id)), assets_(std::move(assets)), policy_{config.denylist}, top_k_default_(config.defaults.top_k) {
  auto engine = std::make_shared<query::QueryEngine>(assets_->dictionary, assets_->scene, std::move(provider));
  agent::SceneEnvironmentConfig env_config;
  env_config.frames = config.defaults.frames;
  env_ = std::make_unique<agent::SceneEnvironment>(engine, assets_->graph, assets_->cameras.front(), env_config);
  env_->set_sink([this](int seq, int total, const field::CameraPose& pose) { publish(seq, total, pose); });
  if (config.decision_url.empty())
    model_ = std::make_unique<agent::RuleDecisionModel>(policy_);
  else
    model_ = std::make_unique<agent::HttpDecisionModel>(config.decision_url,
                                                        std::chrono::milliseconds(config.decision_timeout_ms));
  created_ = std::chrono::system_clock::now();
  last_active_ = std::chrono::steady_clock::now();
}

Session::~Session() {
  std::lock_guard lk(stream_mu_);
  for (auto& w : subscribers_)
    if (auto ch = w.lock()) ch->close();
}

void Session::publish(int seq, int total, const field::CameraPose& pose) {
  const auto frame = field::render_feature_frame(*assets_->scene, pose, semantic::TargetLevel::Object);
  const auto msg = encode_stream_message(seq, total, encode_png(visualize(frame.features)));
  std::lock_guard lk(stream_mu_);
  if (seq == 0) last_sequence_.clear();
  last_sequence_.push_back(msg);
  std::erase_if(subscribers_, [](const auto& w) { return w.expired(); });
  for (auto& w : subscribers_)
    if (auto ch = w.lock()) ch->push(msg);
}

std::shared_ptr<FrameChannel> Session::subscribe() {
  auto ch = std::make_shared<FrameChannel>();
  std::lock_guard lk(stream_mu_);
  for (const auto& m : last_sequence_) ch->push(m);
  subscribers_.push_back(ch);
  return ch;
}

nlohmann::json Session::chat(const std::string& text) {
  const auto r = agent::run_agent_step(tasks_, text, *model_, *env_, policy_);
  const auto& task = tasks_.back();
  nlohmann::json out = {{"response", r.text},
                        {"refused", r.refused},
                        {"degraded", r.degraded},
                        {"status", agent::to_string(task.status)},
                        {"frames", r.frames},
                        {"pose", field::camera_to_json(env_->pose())},
                        {"task", agent::to_json(task)}};
  if (r.frames > 0) out["stream_url"] = "/sessions/" + id_ + "/stream";
  return out;
}

nlohmann::json Session::query(const std::string& text, query::LevelHint hint, int k) {
  if (k == 0) k = top_k_default_;
  if (env_->engine().dictionary().records.empty()) throw InvalidInput("the scene's dictionary is empty");
  const bool rendered = env_->engine().set_view(env_->pose());
  if (!cache_pose_ || !(*cache_pose_ == env_->pose())) {
    cache_pose_ = env_->pose();
    query_cache_.clear();
  }
  const auto key = query_key(text, hint, k);
  if (auto it = query_cache_.find(key); it != query_cache_.end()) {
    ++cache_hits_;
    if (it->second.second) last_mask_.emplace(env_->pose(), *it->second.second);
    auto out = it->second.first;
    out["rendered"] = rendered;
    return out;
  }
  const auto results = env_->engine().query(text, hint, k);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) {
    const auto& rec = env_->engine().dictionary().at(r.target.target_id);
    const auto rle = mask::rle_encode(r.mask);
    arr.push_back({{"id", r.target.target_id},
                   {"label", rec.label ? nlohmann::json(*rec.label) : nlohmann::json(nullptr)},
                   {"level", semantic::to_string(r.target.level)},
                   {"relevancy", r.target.relevancy},
                   {"path", query::to_string(r.target.path)},
                   {"fell_back", r.target.fell_back},
                   {"mask_rle", {{"width", rle.width}, {"height", rle.height}, {"counts", rle.counts}}}});
  }
  std::optional<BinaryRaster> top;
  if (!results.empty()) {
    top = results.front().mask;
    last_mask_.emplace(env_->pose(), *top);
  }
  nlohmann::json out = {{"results", arr}, {"pose", field::camera_to_json(env_->pose())}};
  query_cache_[key] = {out, top};
  out["rendered"] = rendered;
  return out;
}

nlohmann::json Session::move(nav::Direction direction, double distance) {
  env_->move(direction, distance);
  return {{"pose", field::camera_to_json(env_->pose())}};
}

std::vector<std::uint8_t> Session::frame(bool overlay) {
  env_->engine().set_view(env_->pose());
  auto img = visualize(env_->engine().frames().object.features);
  if (overlay && last_mask_ && last_mask_->first == env_->pose()) overlay_mask(img, last_mask_->second);
  return encode_png(img);
}

void Session::touch() {
  std::lock_guard lk(time_mu_);
  last_active_ = std::chrono::steady_clock::now();
}

std::chrono::steady_clock::time_point Session::last_active() const {
  std::lock_guard lk(time_mu_);
  return last_active_;
}

Service::Service(ServiceConfig config, std::shared_ptr<const semantic::EmbeddingProvider> provider)
    : config_(std::move(config)), provider_(std::move(provider)), id_state_(0) {
  validate(config_);
  if (!provider_) provider_ = semantic::make_provider(config_.embedding);
}

std::shared_ptr<const SceneAssets> Service::assets(const std::string& scene) {
  std::lock_guard lk(mu_);
  if (config_.scenes.empty()) throw NotFound("no scenes are configured");
  const std::string name = scene.empty() ? config_.scenes.begin()->first : scene;
  if (auto it = assets_.find(name); it != assets_.end()) return it->second;
  const auto p = config_.scenes.find(name);
  if (p == config_.scenes.end()) throw NotFound("unknown scene " + name);
  auto a = std::make_shared<const SceneAssets>(load_assets(name, p->second));
  assets_[name] = a;
  return a;
}

std::shared_ptr<Session> Service::create_session(const std::string& scene) {
  expire_idle();
  auto a = assets(scene);
  std::string id;
  {
    std::lock_guard lk(mu_);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(splitmix64(id_state_++)));
    id = buf;
  }
  auto s = std::make_shared<Session>(id, a, provider_, config_);
  std::lock_guard lk(mu_);
  sessions_[id] = s;
  return s;
}

std::shared_ptr<Session> Service::find(const std::string& id) {
  expire_idle();
  std::lock_guard lk(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session " + id);
  it->second->touch();
  return it->second;
}

std::size_t Service::session_count() const {
  std::lock_guard lk(mu_);
  return sessions_.size();
}

std::size_t Service::expire_idle(std::chrono::steady_clock::time_point now) {
  if (config_.session_idle_timeout <= 0) return 0;
  const auto limit = std::chrono::seconds(config_.session_idle_timeout);
  std::lock_guard lk(mu_);
  return std::erase_if(sessions_, [&](const auto& kv) { return now - kv.second->last_active() > limit; });
}

}  // namespace mlfield::service
