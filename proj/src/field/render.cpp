#include "mlfield/field/render.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "mlfield/common/error.hpp"
#include "mlfield/common/parallel.hpp"

namespace mlfield::field {
namespace {

std::atomic<std::uint64_t> g_render_count{0};

// Splats whose alpha would stay below this everywhere outside the culling
// radius are dropped from a tile. Small enough that tile culling stays within
// the 1e-4 agreement with exhaustive compositing.
constexpr double kCullAlpha = 1e-7;

struct Splat {
  std::uint32_t index;
  Eigen::Vector2d mean;
  double conic_a, conic_b, conic_c;  // [[a, b], [b, c]]
  double opacity;
  double depth;
  double radius;
};

std::vector<Splat> project_all(std::span<const FeatureGaussian> scene, const CameraPose& cam) {
  std::vector<Splat> splats;
  splats.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& g = scene[i];
    if (!(g.opacity > kCullAlpha)) continue;
    const auto p = project_gaussian(g, cam);
    if (!p) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(p->covariance, Eigen::EigenvaluesOnly);
    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double radius = std::sqrt(2.0 * std::log(g.opacity / kCullAlpha) * lambda_max);
    if (p->mean.x() + radius < 0 || p->mean.x() - radius > cam.width - 1 || p->mean.y() + radius < 0 ||
        p->mean.y() - radius > cam.height - 1)
      continue;
    splats.push_back({static_cast<std::uint32_t>(i), p->mean, p->conic(0, 0), p->conic(0, 1), p->conic(1, 1),
                      double(g.opacity), p->depth, radius});
  }
  // Front to back; equal depths keep scene order.
  std::stable_sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) { return a.depth < b.depth; });
  return splats;
}

// Runs visit(pixel_index, gaussian_index, weight, depth) for every
// contribution, in compositing order per pixel. Tiles run in parallel; each
// pixel is visited by exactly one thread.
template <typename Visit>
void rasterize(std::span<const FeatureGaussian> scene, const CameraPose& cam, unsigned threads, Visit&& visit) {
  validate(cam);
  g_render_count.fetch_add(1, std::memory_order_relaxed);
  const auto splats = project_all(scene, cam);
  const int tiles_x = (cam.width + kTileSize - 1) / kTileSize;
  const int tiles_y = (cam.height + kTileSize - 1) / kTileSize;
  std::vector<std::vector<std::uint32_t>> bins(static_cast<std::size_t>(tiles_x) * tiles_y);
  for (std::uint32_t s = 0; s < splats.size(); ++s) {
    const auto& sp = splats[s];
    const int x0 = std::max(0, static_cast<int>(std::floor((sp.mean.x() - sp.radius) / kTileSize)));
    const int x1 = std::min(tiles_x - 1, static_cast<int>(std::floor((sp.mean.x() + sp.radius) / kTileSize)));
    const int y0 = std::max(0, static_cast<int>(std::floor((sp.mean.y() - sp.radius) / kTileSize)));
    const int y1 = std::min(tiles_y - 1, static_cast<int>(std::floor((sp.mean.y() + sp.radius) / kTileSize)));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) bins[static_cast<std::size_t>(ty) * tiles_x + tx].push_back(s);
  }
  parallel_for(
      bins.size(),
      [&](std::size_t tile) {
        const auto& bin = bins[tile];
        if (bin.empty()) return;
        const int tx = static_cast<int>(tile % tiles_x), ty = static_cast<int>(tile / tiles_x);
        const int x_end = std::min(cam.width, (tx + 1) * kTileSize);
        const int y_end = std::min(cam.height, (ty + 1) * kTileSize);
        for (int y = ty * kTileSize; y < y_end; ++y)
          for (int x = tx * kTileSize; x < x_end; ++x) {
            const auto pixel = static_cast<std::size_t>(y) * cam.width + x;
            double transmittance = 1.0;
            for (auto s : bin) {
              const auto& sp = splats[s];
              const double dx = x - sp.mean.x(), dy = y - sp.mean.y();
              const double power = -0.5 * (sp.conic_a * dx * dx + 2.0 * sp.conic_b * dx * dy + sp.conic_c * dy * dy);
              const double alpha = std::min(kMaxAlpha, sp.opacity * std::exp(power));
              if (alpha <= 0.0) continue;
              visit(pixel, sp.index, alpha * transmittance, sp.depth);
              transmittance *= 1.0 - alpha;
              if (transmittance < kMinTransmittance) break;
            }
          }
      },
      threads);
}

}  // namespace

std::optional<ProjectedGaussian> project_gaussian(const FeatureGaussian& g, const CameraPose& cam) {
  const Eigen::Vector3d t = cam.to_camera(g.position());
  if (!(t.z() > kNearPlane)) return std::nullopt;
  const double tan_x = cam.width / (2.0 * cam.fx), tan_y = cam.height / (2.0 * cam.fy);
  // Clamp the Jacobian evaluation point like the reference splatting kernels
  // so far off-screen splats do not blow up.
  const double lim_x = 1.3 * tan_x, lim_y = 1.3 * tan_y;
  const double tx = std::clamp(t.x() / t.z(), -lim_x, lim_x) * t.z();
  const double ty = std::clamp(t.y() / t.z(), -lim_y, lim_y) * t.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << cam.fx / t.z(), 0.0, -cam.fx * tx / (t.z() * t.z()), 0.0, cam.fy / t.z(), -cam.fy * ty / (t.z() * t.z());
  const Eigen::Matrix<double, 2, 3> m = jac * cam.rotation.transpose();
  ProjectedGaussian out;
  out.covariance = m * g.covariance() * m.transpose();
  out.covariance(0, 0) += kCovarianceFloor;
  out.covariance(1, 1) += kCovarianceFloor;
  const double det = out.covariance.determinant();
  if (!(det > 1e-12) || !out.covariance.allFinite()) throw DegenerateInput("projected gaussian covariance is singular");
  out.conic = out.covariance.inverse();
  out.mean = {cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy};
  out.depth = t.z();
  return out;
}

LevelFrames render_both_levels(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                               const RenderOptions& options) {
  validate(cam);
  LevelFrames out{{FeatureImage(cam.width, cam.height), std::nullopt, cam},
                  {FeatureImage(cam.width, cam.height), std::nullopt, cam}};
  Raster<double> depth(cam.width, cam.height, 0.0), total(cam.width, cam.height, 0.0);
  auto& obj = out.object.features.values();
  auto& part = out.part.features.values();
  rasterize(scene, cam, options.threads, [&](std::size_t p, std::uint32_t i, double w, double z) {
    const auto& g = scene[i];
    for (int c = 0; c < 3; ++c) {
      obj[p * 3 + c] += w * g.object_feature[c];
      part[p * 3 + c] += w * g.part_feature[c];
    }
    depth[p] += w * z;
    total[p] += w;
  });
  if (options.with_depth) {
    for (std::size_t p = 0; p < depth.size(); ++p)
      if (total[p] < kMinTransmittance) depth[p] = 0.0;
    out.object.depth = depth;
    out.part.depth = std::move(depth);
  }
  return out;
}

FeatureFrame render_feature_frame(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                                  semantic::TargetLevel level, const RenderOptions& options) {
  validate(cam);
  FeatureFrame out{FeatureImage(cam.width, cam.height), std::nullopt, cam};
  Raster<double> depth(cam.width, cam.height, 0.0), total(cam.width, cam.height, 0.0);
  auto& f = out.features.values();
  rasterize(scene, cam, options.threads, [&](std::size_t p, std::uint32_t i, double w, double z) {
    const auto& feat = scene[i].feature(level);
    for (int c = 0; c < 3; ++c) f[p * 3 + c] += w * feat[c];
    depth[p] += w * z;
    total[p] += w;
  });
  if (options.with_depth) {
    for (std::size_t p = 0; p < depth.size(); ++p)
      if (total[p] < kMinTransmittance) depth[p] = 0.0;
    out.depth = std::move(depth);
  }
  return out;
}

Raster<double> render_depth(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                            const RenderOptions& options) {
  validate(cam);
  Raster<double> depth(cam.width, cam.height, 0.0), total(cam.width, cam.height, 0.0);
  rasterize(scene, cam, options.threads, [&](std::size_t p, std::uint32_t, double w, double z) {
    depth[p] += w * z;
    total[p] += w;
  });
  for (std::size_t p = 0; p < depth.size(); ++p)
    if (total[p] < kMinTransmittance) depth[p] = 0.0;
  return depth;
}

BlendWeights compute_blend_weights(std::span<const FeatureGaussian> scene, const CameraPose& cam,
                                   const RenderOptions& options) {
  validate(cam);
  struct Entry {
    std::uint32_t gaussian;
    float weight;
    float depth;
  };
  const std::size_t n = static_cast<std::size_t>(cam.width) * cam.height;
  std::vector<std::vector<Entry>> per_pixel(n);
  rasterize(scene, cam, options.threads, [&](std::size_t p, std::uint32_t i, double w, double z) {
    per_pixel[p].push_back({i, static_cast<float>(w), static_cast<float>(z)});
  });
  BlendWeights out;
  out.width = cam.width;
  out.height = cam.height;
  out.offsets.resize(n + 1);
  std::size_t total = 0;
  for (std::size_t p = 0; p < n; ++p) {
    out.offsets[p] = static_cast<std::uint32_t>(total);
    total += per_pixel[p].size();
  }
  out.offsets[n] = static_cast<std::uint32_t>(total);
  out.gaussian.reserve(total);
  out.weight.reserve(total);
  out.depth.reserve(total);
  for (const auto& entries : per_pixel)
    for (const auto& e : entries) {
      out.gaussian.push_back(e.gaussian);
      out.weight.push_back(e.weight);
      out.depth.push_back(e.depth);
    }
  return out;
}

FeatureImage apply_blend_weights(const BlendWeights& weights, std::span<const FeatureGaussian> scene,
                                 semantic::TargetLevel level) {
  FeatureImage out(weights.width, weights.height);
  auto& f = out.values();
  const std::size_t n = static_cast<std::size_t>(weights.width) * weights.height;
  for (std::size_t p = 0; p < n; ++p)
    for (auto k = weights.offsets[p]; k < weights.offsets[p + 1]; ++k) {
      const auto& feat = scene[weights.gaussian[k]].feature(level);
      const double w = weights.weight[k];
      for (int c = 0; c < 3; ++c) f[p * 3 + c] += w * feat[c];
    }
  return out;
}

std::uint64_t render_invocations() { return g_render_count.load(std::memory_order_relaxed); }

}  // namespace mlfield::field
