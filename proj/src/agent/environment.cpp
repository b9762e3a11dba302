#include "mlfield/agent/environment.hpp"

#include <cmath>
#include <limits>

#include "mlfield/common/error.hpp"
#include "mlfield/field/render.hpp"

namespace mlfield::agent {
namespace {

nlohmann::json position_json(const Eigen::Vector3d& p) { return {p.x(), p.y(), p.z()}; }

}  // namespace

SceneEnvironment::SceneEnvironment(std::shared_ptr<query::QueryEngine> engine,
                                   std::shared_ptr<const nav::KeypointGraph> graph, field::CameraPose start,
                                   SceneEnvironmentConfig config)
    : engine_(std::move(engine)), graph_(std::move(graph)), config_(config) {
  if (!engine_ || !graph_) throw InvalidInput("scene environment needs an engine and a graph");
  if (graph_->nodes.empty()) throw InvalidInput("scene environment needs a non-empty graph");
  set_pose(start);
  lo_ = hi_ = graph_->nodes.front();
  for (const auto& p : graph_->nodes) {
    lo_ = lo_.cwiseMin(p);
    hi_ = hi_.cwiseMax(p);
  }
  const double margin = std::max(graph_->step, 1e-9);
  lo_.array() -= margin;
  hi_.array() += margin;
}

void SceneEnvironment::set_pose(const field::CameraPose& pose) {
  field::validate(pose);
  pose_ = pose;
  pending_.clear();
}

nlohmann::json SceneEnvironment::localize(const std::string& text, query::LevelHint level) {
  engine_->set_view(pose_);
  const auto results = engine_->query(text, level, 1);
  if (results.empty()) return {{"error", "no target matched"}};
  const auto& r = results.front();
  const auto& rec = engine_->dictionary().at(r.target.target_id);
  std::size_t visible = 0;
  for (std::size_t p = 0; p < r.mask.size(); ++p) visible += r.mask[p];
  return {{"target_id", r.target.target_id},
          {"label", rec.label.value_or("")},
          {"level", semantic::to_string(r.target.level)},
          {"relevancy", r.target.relevancy},
          {"path", query::to_string(r.target.path)},
          {"visible_pixels", visible}};
}

std::optional<Eigen::Vector3d> SceneEnvironment::target_centre(std::uint32_t target_id) const {
  if (auto it = centres_.find(target_id); it != centres_.end()) return it->second;
  const auto& dict = engine_->dictionary();
  const auto& rec = dict.at(target_id);
  const double radius = dict.lattice.spacing / 2;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  std::size_t n = 0;
  for (const auto& g : engine_->scene()) {
    const auto f = g.feature(rec.level);
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_id = 0;
    for (const auto& [id, other] : dict.records) {
      if (other.level != rec.level) continue;
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += std::pow(double(f[k]) - other.code.components[k], 2);
      if (d2 < best) best = d2, best_id = id;
    }
    if (best_id == target_id && std::sqrt(best) <= radius) {
      sum += g.position();
      ++n;
    }
  }
  std::optional<Eigen::Vector3d> out;
  if (n > 0) out = sum / double(n);
  centres_[target_id] = out;
  return out;
}

std::optional<std::uint32_t> SceneEnvironment::viewing_node(const Eigen::Vector3d& target) const {
  std::optional<std::uint32_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < graph_->size(); ++i) {
    field::CameraPose cam = pose_;
    cam.rotation = graph_->rotations[i];
    cam.translation = graph_->nodes[i];
    const auto c = cam.to_camera(target);
    if (c.z() <= field::kNearPlane) continue;
    const double x = cam.fx * c.x() / c.z() + cam.cx, y = cam.fy * c.y() / c.z() + cam.cy;
    if (x < 0 || y < 0 || x > cam.width - 1 || y > cam.height - 1) continue;
    const double d = (graph_->nodes[i] - target).norm();
    if (d < best_d) best_d = d, best = i;
  }
  return best;
}

nlohmann::json SceneEnvironment::navigate(std::uint32_t target_id) {
  if (!engine_->dictionary().find(target_id)) return {{"error", "unknown target " + std::to_string(target_id)}};
  const auto centre = target_centre(target_id);
  if (!centre) return {{"error", "target has no trained Gaussians"}};
  const auto goal = viewing_node(*centre);
  if (!goal) return {{"error", "no keypoint views the target"}};
  const auto start = nav::nearest_node(*graph_, pose_.translation);
  const auto path = nav::shortest_path(*graph_, start, *goal);
  if (!path) return {{"error", "no-path"}, {"from_node", start}, {"to_node", *goal}};

  std::vector<field::CameraPose> keyposes{pose_};
  for (auto& p : nav::keypoint_poses(*graph_, *path, pose_)) keyposes.push_back(p);
  keyposes.back().rotation = nav::facing(*centre - keyposes.back().translation);
  pending_ = nav::interpolate_path(keyposes, config_.frames, config_.interpolation, config_.rotation);
  return {{"from_node", start},
          {"to_node", *goal},
          {"keypoints", path->keypoints},
          {"length", path->total_length},
          {"target_position", position_json(*centre)},
          {"frames", pending_.size()}};
}

nlohmann::json SceneEnvironment::move(nav::Direction direction, double distance) {
  pose_ = nav::move_camera(pose_, direction, distance);
  pending_.clear();
  return {{"position", position_json(pose_.translation)}};
}

nlohmann::json SceneEnvironment::render() {
  std::vector<field::CameraPose> frames = pending_.empty() ? std::vector<field::CameraPose>{pose_} : pending_;
  pending_.clear();
  const int total = static_cast<int>(frames.size());
  for (int i = 0; i < total; ++i)
    if (sink_) sink_(i, total, frames[i]);
  pose_ = frames.back();
  return {{"frames", total}, {"position", position_json(pose_.translation)}};
}

Eigen::Vector3d SceneEnvironment::preview_move(nav::Direction direction, double distance) const {
  return nav::move_camera(pose_, direction, distance).translation;
}

bool SceneEnvironment::inside_scene(const Eigen::Vector3d& p) const {
  return (p.array() >= lo_.array()).all() && (p.array() <= hi_.array()).all();
}

}  // namespace mlfield::agent
