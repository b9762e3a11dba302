#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mlfield/field/camera.hpp"
#include "mlfield/nav/graph.hpp"
#include "mlfield/nav/motion.hpp"
#include "mlfield/query/engine.hpp"

namespace mlfield::agent {

// The function modules the inner loop calls. Each returns its feedback as
// JSON; {"error": "..."} marks a failed module.
class AgentEnvironment {
 public:
  virtual ~AgentEnvironment() = default;
  virtual nlohmann::json localize(const std::string& text, query::LevelHint level) = 0;
  virtual nlohmann::json navigate(std::uint32_t target_id) = 0;
  virtual nlohmann::json move(nav::Direction direction, double distance) = 0;
  // Renders the pending navigation frames, or the current view when none.
  virtual nlohmann::json render() = 0;
  // Position the camera would reach; used for the scene-bounds check.
  virtual Eigen::Vector3d preview_move(nav::Direction direction, double distance) const = 0;
  virtual bool inside_scene(const Eigen::Vector3d& p) const = 0;
};

// Receives every rendered frame in order: (sequence index, total, pose).
using FrameSink = std::function<void(int, int, const field::CameraPose&)>;

struct SceneEnvironmentConfig {
  int frames = nav::kDefaultFrameCount;  // M
  nav::InterpolationMode interpolation = nav::InterpolationMode::Segmentwise;
  nav::RotationMode rotation = nav::RotationMode::Slerp;
  double stand_off = 0.0;  // 0: keep the goal node position
};

// Environment over a trained scene: queries through a QueryEngine, paths
// over a keypoint graph, frames sent to a sink.
class SceneEnvironment final : public AgentEnvironment {
 public:
  SceneEnvironment(std::shared_ptr<query::QueryEngine> engine, std::shared_ptr<const nav::KeypointGraph> graph,
                   field::CameraPose start, SceneEnvironmentConfig config = {});

  nlohmann::json localize(const std::string& text, query::LevelHint level) override;
  nlohmann::json navigate(std::uint32_t target_id) override;
  nlohmann::json move(nav::Direction direction, double distance) override;
  nlohmann::json render() override;
  Eigen::Vector3d preview_move(nav::Direction direction, double distance) const override;
  bool inside_scene(const Eigen::Vector3d& p) const override;

  const field::CameraPose& pose() const { return pose_; }
  void set_pose(const field::CameraPose& pose);
  void set_sink(FrameSink sink) { sink_ = std::move(sink); }
  const query::QueryEngine& engine() const { return *engine_; }
  query::QueryEngine& engine() { return *engine_; }

  // Mean position of the Gaussians whose trained feature is nearest the
  // target's code (within half the lattice spacing); nullopt if none.
  std::optional<Eigen::Vector3d> target_centre(std::uint32_t target_id) const;
  // Graph node with the target in front of it and inside its view, nearest
  // first, lowest index on ties; nullopt if no node sees it.
  std::optional<std::uint32_t> viewing_node(const Eigen::Vector3d& target) const;

 private:
  std::shared_ptr<query::QueryEngine> engine_;
  std::shared_ptr<const nav::KeypointGraph> graph_;
  field::CameraPose pose_;
  SceneEnvironmentConfig config_;
  std::vector<field::CameraPose> pending_;
  FrameSink sink_;
  Eigen::Vector3d lo_, hi_;
  mutable std::map<std::uint32_t, std::optional<Eigen::Vector3d>> centres_;
};

}  // namespace mlfield::agent
