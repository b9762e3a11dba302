#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlfield/semantic/providers.hpp"

namespace mlfield::service {

// Artifacts of one scene. Relative paths in a config file are resolved
// against the file's directory.
struct ScenePaths {
  std::filesystem::path scene;       // trained Gaussians
  std::filesystem::path dictionary;  // mapping dictionary
  std::filesystem::path graph;       // keypoint graph
  std::filesystem::path cameras;     // training cameras; the first is the start pose
};

struct Defaults {
  double reserving_weight = 0.7;  // w, used when building dictionaries
  double tolerance = 0.02;        // t
  double ssim_weight = 0.2;       // lambda
  int frames = 150;               // M
  int top_k = 1;
};

struct ServiceConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  int session_idle_timeout = 1800;  // seconds; 0 keeps sessions forever
  std::vector<std::string> denylist;
  Defaults defaults;
  semantic::ProviderSpec embedding;
  std::string decision_url;  // empty: built-in rule model
  int decision_timeout_ms = 10000;
  std::map<std::string, ScenePaths> scenes;  // the first (by name) is the default
};

// Throws InvalidInput naming the offending key.
void validate(const ServiceConfig& config);

// TOML layout: [server] bind/port/session_idle_timeout/denylist,
// [defaults] reserving_weight/tolerance/ssim_weight/frames/top_k,
// [embedding] mode/location/seed/dim, [decision] url/timeout_ms,
// [scenes.<name>] scene/dictionary/graph/cameras. Throws FormatError on
// syntax errors or mistyped values.
ServiceConfig parse_config(const std::string& toml_text, const std::filesystem::path& base_dir = {});
ServiceConfig load_config(const std::filesystem::path& path);

inline constexpr const char* kEnvPrefix = "MLFIELD_";

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();

// MLFIELD_BIND, _PORT, _SESSION_IDLE_TIMEOUT, _DENYLIST (comma separated),
// _RESERVING_WEIGHT, _TOLERANCE, _SSIM_WEIGHT, _FRAMES, _TOP_K,
// _EMBEDDING_MODE, _EMBEDDING_LOCATION, _EMBEDDING_SEED, _EMBEDDING_DIM,
// _DECISION_URL, _DECISION_TIMEOUT_MS. Unparsable numbers throw InvalidInput.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& env);

}  // namespace mlfield::service
