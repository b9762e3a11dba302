#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlfield/semantic/identity.hpp"

namespace mlfield::field {

using Feature3 = std::array<float, 3>;

struct FeatureGaussian {
  std::array<float, 3> mean{};
  std::array<float, 3> scale{1.f, 1.f, 1.f};
  std::array<float, 4> rotation{1.f, 0.f, 0.f, 0.f};  // quaternion w, x, y, z
  float opacity = 1.f;
  Feature3 object_feature{};
  Feature3 part_feature{};

  Feature3& feature(semantic::TargetLevel level) {
    return level == semantic::TargetLevel::Object ? object_feature : part_feature;
  }
  const Feature3& feature(semantic::TargetLevel level) const {
    return level == semantic::TargetLevel::Object ? object_feature : part_feature;
  }

  Eigen::Vector3d position() const { return {mean[0], mean[1], mean[2]}; }
  // R S S^T R^T.
  Eigen::Matrix3d covariance() const;

  friend bool operator==(const FeatureGaussian&, const FeatureGaussian&) = default;
};

using Scene = std::vector<FeatureGaussian>;

// Throws InvalidInput on a non-unit quaternion (1e-6), non-positive scale,
// opacity outside [0, 1] or non-finite values.
void validate(const FeatureGaussian& g);
void validate(std::span<const FeatureGaussian> scene);

// "MLFS" u32 version(=1) u32 count, per Gaussian 17 x f32:
//   mean 3, scale 3, rotation (w, x, y, z) 4, opacity 1, object feature 3, part feature 3
std::vector<std::uint8_t> serialize_scene(std::span<const FeatureGaussian> scene);
Scene deserialize_scene(std::span<const std::uint8_t> bytes);
void write_scene(const std::filesystem::path& path, std::span<const FeatureGaussian> scene);
Scene read_scene(const std::filesystem::path& path);

// Reads geometry from a standard Gaussian-splatting point cloud export (PLY,
// ascii or binary little-endian) with x/y/z, scale_0..2 (log scale),
// rot_0..3 (w first, unnormalized) and opacity (logit). Other properties are
// ignored and features start at zero.
Scene import_splat_ply(const std::filesystem::path& path);
Scene parse_splat_ply(std::span<const std::uint8_t> bytes);

}  // namespace mlfield::field
