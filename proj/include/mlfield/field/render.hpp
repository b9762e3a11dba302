#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlfield/common/feature_image.hpp"
#include "mlfield/common/raster.hpp"
#include "mlfield/field/camera.hpp"
#include "mlfield/field/gaussian.hpp"

namespace mlfield::field {

inline constexpr double kNearPlane = 0.01;
inline constexpr double kCovarianceFloor = 0.3;
inline constexpr double kMaxAlpha = 0.99;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr int kTileSize = 16;

struct ProjectedGaussian {
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;  // includes the low-pass floor
  Eigen::Matrix2d conic;       // inverse covariance
  double depth = 0.0;          // camera-frame z
};

// EWA splat of one Gaussian. std::nullopt when the centre is behind the near
// plane. Throws DegenerateInput when the 2D covariance cannot be inverted.
std::optional<ProjectedGaussian> project_gaussian(const FeatureGaussian& g, const CameraPose& cam);

struct FeatureFrame {
  FeatureImage features;
  std::optional<Raster<double>> depth;
  CameraPose camera;
};

struct RenderOptions {
  bool with_depth = false;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Front-to-back alpha compositing of one feature level over 16x16 tiles.
FeatureFrame render_feature_frame(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                                  semantic::TargetLevel level, const RenderOptions& options = {});

// Both levels from a single rasterization pass.
struct LevelFrames {
  FeatureFrame object;
  FeatureFrame part;
};
LevelFrames render_both_levels(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                               const RenderOptions& options = {});

// Depth-only render (blended view depth; 0 where the total weight < 1e-4).
Raster<double> render_depth(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                            const RenderOptions& options = {});

// Per-pixel compositing weights a_i * prod_{j<i}(1 - a_j) of one view, stored
// sparsely. Geometry is frozen during feature training, so they are computed
// once per view and reused for every forward and backward pass.
struct BlendWeights {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> offsets;  // size W*H + 1, into the arrays below
  std::vector<std::uint32_t> gaussian;
  std::vector<float> weight;
  std::vector<float> depth;

  std::size_t entries() const { return gaussian.size(); }
};

BlendWeights compute_blend_weights(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                                   const RenderOptions& options = {});

// F(p) = sum_i w_i(p) f_i for the chosen level.
FeatureImage apply_blend_weights(const BlendWeights& weights, std::span<const FeatureGaussian> scene,
                                 semantic::TargetLevel level);

// Number of rasterization passes run since start-up (all entry points above
// except apply_blend_weights count one each).
std::uint64_t render_invocations();

}  // namespace mlfield::field
