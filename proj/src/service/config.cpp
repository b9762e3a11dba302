#include "mlfield/service/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <toml.hpp>

#include "mlfield/common/error.hpp"

namespace mlfield::service {
namespace {

template <class T>
void read(const toml::node_view<const toml::node>& node, const std::string& key, T& out) {
  if (!node) return;
  if constexpr (std::is_same_v<T, std::string>) {
    auto v = node.value<std::string>();
    if (!v || !node.is_string()) throw FormatError("config key " + key + " must be a string");
    out = *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!node.is_number()) throw FormatError("config key " + key + " must be a number");
    out = *node.value<double>();
  } else {
    if (!node.is_integer()) throw FormatError("config key " + key + " must be an integer");
    out = static_cast<T>(*node.value<std::int64_t>());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InvalidInput(std::string(kEnvPrefix) + key + " is not a number: " + text);
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

void validate(const ServiceConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) { throw InvalidInput("config " + key + " " + why); };
  if (c.bind.empty()) fail("server.bind", "is empty");
  if (c.port < 0 || c.port > 65535) fail("server.port", "must be in [0, 65535]");
  if (c.session_idle_timeout < 0) fail("server.session_idle_timeout", "must be >= 0");
  const auto& d = c.defaults;
  if (!(d.reserving_weight >= 0 && d.reserving_weight <= 1)) fail("defaults.reserving_weight", "must be in [0, 1]");
  if (!(d.tolerance > 0 && d.tolerance < 0.25)) fail("defaults.tolerance", "must be in (0, 0.25)");
  if (!(d.ssim_weight >= 0 && d.ssim_weight <= 1)) fail("defaults.ssim_weight", "must be in [0, 1]");
  if (d.frames < 1) fail("defaults.frames", "must be >= 1");
  if (d.top_k < 1) fail("defaults.top_k", "must be >= 1");
  if (c.embedding.mode != "synthetic" && c.embedding.mode != "file" && c.embedding.mode != "http")
    fail("embedding.mode", "must be synthetic, file or http");
  if (c.embedding.mode != "synthetic" && c.embedding.location.empty()) fail("embedding.location", "is required");
  if (c.embedding.dim < 1) fail("embedding.dim", "must be >= 1");
  if (c.decision_timeout_ms < 1) fail("decision.timeout_ms", "must be >= 1");
  for (const auto& [name, p] : c.scenes)
    if (p.scene.empty() || p.dictionary.empty() || p.graph.empty() || p.cameras.empty())
      fail("scenes." + name, "needs scene, dictionary, graph and cameras");
}

ServiceConfig parse_config(const std::string& toml_text, const std::filesystem::path& base_dir) {
  toml::table t;
  try {
    t = toml::parse(toml_text);
  } catch (const toml::parse_error& e) {
    throw FormatError(std::string("config: ") + std::string(e.description()));
  }
  const auto& root = std::as_const(t);
  ServiceConfig c;
  read(root["server"]["bind"], "server.bind", c.bind);
  read(root["server"]["port"], "server.port", c.port);
  read(root["server"]["session_idle_timeout"], "server.session_idle_timeout", c.session_idle_timeout);
  if (auto deny = root["server"]["denylist"]) {
    const auto* arr = deny.as_array();
    if (!arr) throw FormatError("config key server.denylist must be an array of strings");
    for (const auto& item : *arr) {
      if (!item.is_string()) throw FormatError("config key server.denylist must be an array of strings");
      c.denylist.push_back(*item.value<std::string>());
    }
  }
  read(root["defaults"]["reserving_weight"], "defaults.reserving_weight", c.defaults.reserving_weight);
  read(root["defaults"]["tolerance"], "defaults.tolerance", c.defaults.tolerance);
  read(root["defaults"]["ssim_weight"], "defaults.ssim_weight", c.defaults.ssim_weight);
  read(root["defaults"]["frames"], "defaults.frames", c.defaults.frames);
  read(root["defaults"]["top_k"], "defaults.top_k", c.defaults.top_k);
  read(root["embedding"]["mode"], "embedding.mode", c.embedding.mode);
  read(root["embedding"]["location"], "embedding.location", c.embedding.location);
  read(root["embedding"]["seed"], "embedding.seed", c.embedding.seed);
  read(root["embedding"]["dim"], "embedding.dim", c.embedding.dim);
  if (c.embedding.mode == "file" && !c.embedding.location.empty())
    c.embedding.location = resolve(base_dir, c.embedding.location).string();
  read(root["decision"]["url"], "decision.url", c.decision_url);
  read(root["decision"]["timeout_ms"], "decision.timeout_ms", c.decision_timeout_ms);
  if (auto scenes = root["scenes"]) {
    const auto* tbl = scenes.as_table();
    if (!tbl) throw FormatError("config key scenes must be a table");
    for (const auto& [name, node] : *tbl) {
      const auto view = toml::node_view<const toml::node>(node);
      const std::string key = "scenes." + std::string(name.str());
      if (!view.is_table()) throw FormatError("config key " + key + " must be a table");
      std::string scene, dict, graph, cams;
      read(view["scene"], key + ".scene", scene);
      read(view["dictionary"], key + ".dictionary", dict);
      read(view["graph"], key + ".graph", graph);
      read(view["cameras"], key + ".cameras", cams);
      ScenePaths p;
      if (!scene.empty()) p.scene = resolve(base_dir, scene);
      if (!dict.empty()) p.dictionary = resolve(base_dir, dict);
      if (!graph.empty()) p.graph = resolve(base_dir, graph);
      if (!cams.empty()) p.cameras = resolve(base_dir, cams);
      c.scenes[std::string(name.str())] = p;
    }
  }
  validate(c);
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env_overrides(ServiceConfig& c, const EnvLookup& env) {
  auto get = [&](const char* key) { return env(std::string(kEnvPrefix) + key); };
  if (auto v = get("BIND")) c.bind = *v;
  if (auto v = get("PORT")) c.port = parse_number<int>("PORT", *v);
  if (auto v = get("SESSION_IDLE_TIMEOUT")) c.session_idle_timeout = parse_number<int>("SESSION_IDLE_TIMEOUT", *v);
  if (auto v = get("DENYLIST")) c.denylist = split_list(*v);
  if (auto v = get("RESERVING_WEIGHT")) c.defaults.reserving_weight = parse_number<double>("RESERVING_WEIGHT", *v);
  if (auto v = get("TOLERANCE")) c.defaults.tolerance = parse_number<double>("TOLERANCE", *v);
  if (auto v = get("SSIM_WEIGHT")) c.defaults.ssim_weight = parse_number<double>("SSIM_WEIGHT", *v);
  if (auto v = get("FRAMES")) c.defaults.frames = parse_number<int>("FRAMES", *v);
  if (auto v = get("TOP_K")) c.defaults.top_k = parse_number<int>("TOP_K", *v);
  if (auto v = get("EMBEDDING_MODE")) c.embedding.mode = *v;
  if (auto v = get("EMBEDDING_LOCATION")) c.embedding.location = *v;
  if (auto v = get("EMBEDDING_SEED")) c.embedding.seed = parse_number<std::uint64_t>("EMBEDDING_SEED", *v);
  if (auto v = get("EMBEDDING_DIM")) c.embedding.dim = parse_number<std::size_t>("EMBEDDING_DIM", *v);
  if (auto v = get("DECISION_URL")) c.decision_url = *v;
  if (auto v = get("DECISION_TIMEOUT_MS")) c.decision_timeout_ms = parse_number<int>("DECISION_TIMEOUT_MS", *v);
  validate(c);
}

}  // namespace mlfield::service
