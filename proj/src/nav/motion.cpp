#include "mlfield/nav/motion.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "mlfield/common/error.hpp"

namespace mlfield::nav {
namespace {

Eigen::Matrix3d project_to_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Eigen::Matrix3d blend_rotation(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b, double t, RotationMode mode) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  if (mode == RotationMode::LinearMatrix) return project_to_rotation((1 - t) * a + t * b);
  const Eigen::Quaterniond qa(a), qb(b);
  return qa.slerp(t, qb).normalized().toRotationMatrix();
}

field::CameraPose with(const field::CameraPose& like, const Eigen::Vector3d& t, const Eigen::Matrix3d& r) {
  auto p = like;
  p.translation = t;
  p.rotation = r;
  return p;
}

}  // namespace

std::vector<field::CameraPose> keypoint_poses(const KeypointGraph& graph, const NavPath& path,
                                              const field::CameraPose& intrinsics) {
  std::vector<field::CameraPose> out;
  for (auto k : path.keypoints) {
    if (k >= graph.size()) throw NotFound("path node " + std::to_string(k) + " is not in the graph");
    out.push_back(with(intrinsics, graph.nodes[k], graph.rotations[k]));
  }
  return out;
}

std::vector<int> allocate_frames(std::span<const double> segment_lengths, int frames) {
  const int n = static_cast<int>(segment_lengths.size());
  if (frames < n) throw InvalidInput("need at least one frame per path segment");
  std::vector<int> alloc(n, 1);
  for (int extra = frames - n; extra > 0; --extra) {
    int best = 0;
    for (int j = 1; j < n; ++j)
      if (segment_lengths[j] / alloc[j] > segment_lengths[best] / alloc[best]) best = j;
    ++alloc[best];
  }
  return alloc;
}

std::vector<field::CameraPose> interpolate_path(std::span<const field::CameraPose> keyposes, int frames,
                                                InterpolationMode mode, RotationMode rotation) {
  if (keyposes.empty()) throw InvalidInput("cannot interpolate an empty path");
  if (frames < 1) throw InvalidInput("frame count must be at least 1");
  const auto& first = keyposes.front();
  const auto& last = keyposes.back();
  std::vector<field::CameraPose> out;
  out.reserve(frames + 1);

  if (keyposes.size() == 1) {
    out.assign(frames + 1, first);
    return out;
  }

  if (mode == InterpolationMode::Literal) {
    Eigen::Vector3d dt = Eigen::Vector3d::Zero();
    Eigen::Matrix3d dr = Eigen::Matrix3d::Zero();
    for (std::size_t v = 1; v < keyposes.size(); ++v) {
      dt += keyposes[v].translation - keyposes[v - 1].translation;
      dr += keyposes[v].rotation - keyposes[v - 1].rotation;
    }
    for (int i = 0; i <= frames; ++i) {
      const double s = double(i) / frames;
      const Eigen::Vector3d t = first.translation + s * dt;
      // the rotation sum telescopes the same way, to first -> last
      const Eigen::Matrix3d r = rotation == RotationMode::LinearMatrix
                                    ? (i == 0 ? first.rotation : project_to_rotation(first.rotation + s * dr))
                                    : blend_rotation(first.rotation, last.rotation, s, rotation);
      out.push_back(with(first, t, r));
    }
    return out;
  }

  std::vector<double> lengths;
  for (std::size_t v = 1; v < keyposes.size(); ++v)
    lengths.push_back((keyposes[v].translation - keyposes[v - 1].translation).norm());
  const auto alloc = allocate_frames(lengths, frames);
  out.push_back(first);
  for (std::size_t j = 0; j < alloc.size(); ++j) {
    const auto& a = keyposes[j];
    const auto& b = keyposes[j + 1];
    for (int i = 1; i <= alloc[j]; ++i) {
      if (i == alloc[j]) {
        out.push_back(with(first, b.translation, b.rotation));
        continue;
      }
      const double s = double(i) / alloc[j];
      out.push_back(with(first, a.translation + s * (b.translation - a.translation),
                         blend_rotation(a.rotation, b.rotation, s, rotation)));
    }
  }
  return out;
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::Forward: return "forward";
    case Direction::Back: return "back";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
    case Direction::Up: return "up";
    case Direction::Down: return "down";
  }
  return "?";
}

Direction parse_direction(const std::string& s) {
  for (auto d : {Direction::Forward, Direction::Back, Direction::Left, Direction::Right, Direction::Up,
                 Direction::Down})
    if (s == to_string(d)) return d;
  if (s == "backward") return Direction::Back;
  throw InvalidInput("unknown direction '" + s + "'");
}

field::CameraPose move_camera(const field::CameraPose& pose, Direction direction, double d) {
  if (!(d >= 0)) throw InvalidInput("moving distance must be non-negative");
  Eigen::Vector3d u;
  switch (direction) {
    case Direction::Forward: u = {0, 0, 1}; break;
    case Direction::Back: u = {0, 0, -1}; break;
    case Direction::Right: u = {1, 0, 0}; break;
    case Direction::Left: u = {-1, 0, 0}; break;
    case Direction::Up: u = {0, -1, 0}; break;
    case Direction::Down: u = {0, 1, 0}; break;
  }
  auto out = pose;
  out.translation = pose.translation + d * (pose.rotation * u);
  return out;
}

}  // namespace mlfield::nav
