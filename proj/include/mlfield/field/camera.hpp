#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace mlfield::field {

// Pinhole camera with OpenCV axes (x right, y down, z forward). `rotation` maps
// camera axes to world axes and `translation` is the camera centre in world
// coordinates, so a world point p sits at rotation^T (p - translation) in the
// camera frame. Pixel (x, y) is sampled at image coordinate (x, y).
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation.transpose() * (world - translation); }
  Eigen::Vector3d forward() const { return rotation.col(2); }

  friend bool operator==(const CameraPose& a, const CameraPose& b) {
    return a.rotation == b.rotation && a.translation == b.translation && a.fx == b.fx && a.fy == b.fy &&
           a.cx == b.cx && a.cy == b.cy && a.width == b.width && a.height == b.height;
  }
};

// Throws InvalidInput unless R^T R = I and det R = +1 (both within 1e-6),
// focal lengths are positive and the resolution is non-empty.
void validate(const CameraPose& cam);

// Camera looking from `eye` toward `target`; `up` is the world up hint (the
// camera's -y axis is aligned with it as far as possible).
CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up, double fx,
                   double fy, int width, int height);

// {"R": [9 row-major], "T": [3], "fx", "fy", "cx", "cy", "width", "height"}
nlohmann::json camera_to_json(const CameraPose& cam);
CameraPose camera_from_json(const nlohmann::json& j);
CameraPose read_camera_json(const std::filesystem::path& path);

// "MLFC" u32 version(=1) u32 count, per view:
//   R 9 x f64 row-major, T 3 x f64, fx fy cx cy f64, u32 width, u32 height
std::vector<std::uint8_t> serialize_cameras(const std::vector<CameraPose>& cams);
std::vector<CameraPose> deserialize_cameras(std::span<const std::uint8_t> bytes);
void write_cameras(const std::filesystem::path& path, const std::vector<CameraPose>& cams);
std::vector<CameraPose> read_cameras(const std::filesystem::path& path);

}  // namespace mlfield::field
