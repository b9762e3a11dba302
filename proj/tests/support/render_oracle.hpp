#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "mlfield/field/camera.hpp"
#include "mlfield/field/gaussian.hpp"
#include "mlfield/field/render.hpp"

namespace oracle {

using mlfield::FeatureImage;
using mlfield::field::CameraPose;
using mlfield::field::FeatureGaussian;
using mlfield::field::ProjectedGaussian;
using mlfield::field::project_gaussian;
using mlfield::field::Scene;
using mlfield::semantic::TargetLevel;

// Gaussians in front of an identity camera: centres in [-1, 1]^2 x [2, 5].
inline Scene random_scene(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0, 1);
  Scene s;
  for (int i = 0; i < n; ++i) {
    FeatureGaussian g;
    g.mean = {float(u(rng) * 2 - 1), float(u(rng) * 2 - 1), float(2 + u(rng) * 3)};
    g.scale = {float(0.02 + u(rng) * 0.3), float(0.02 + u(rng) * 0.3), float(0.02 + u(rng) * 0.3)};
    Eigen::Quaterniond q(u(rng) - .5, u(rng) - .5, u(rng) - .5, u(rng) - .5);
    q.normalize();
    g.rotation = {float(q.w()), float(q.x()), float(q.y()), float(q.z())};
    double qn = 0;
    for (float v : g.rotation) qn += double(v) * v;
    for (auto& v : g.rotation) v = float(v / std::sqrt(qn));
    g.opacity = float(u(rng));
    g.object_feature = {float(u(rng)), float(u(rng)), float(u(rng))};
    g.part_feature = {float(u(rng)), float(u(rng)), float(u(rng))};
    s.push_back(g);
  }
  return s;
}

// Exhaustive compositing over every projected Gaussian, sorted by depth then
// index, with no culling and no early termination.
struct BruteForce {
  FeatureImage features;
  std::vector<double> weight_sum;
};

inline BruteForce brute_force(const Scene& scene, const CameraPose& cam, TargetLevel level) {
  struct Item {
    double depth;
    std::size_t index;
    ProjectedGaussian p;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (auto p = project_gaussian(scene[i], cam)) items.push_back({p->depth, i, *p});
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.depth != b.depth ? a.depth < b.depth : a.index < b.index; });
  BruteForce out{FeatureImage(cam.width, cam.height), std::vector<double>(std::size_t(cam.width) * cam.height)};
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      double t = 1.0;
      std::array<double, 3> f{0, 0, 0};
      double wsum = 0;
      for (const auto& it : items) {
        const Eigen::Vector2d d(x - it.p.mean.x(), y - it.p.mean.y());
        const double a = std::min(0.99, scene[it.index].opacity * std::exp(-0.5 * d.dot(it.p.conic * d)));
        for (int c = 0; c < 3; ++c) f[c] += scene[it.index].feature(level)[c] * a * t;
        wsum += a * t;
        t *= 1 - a;
      }
      out.features.set_pixel(x, y, f);
      out.weight_sum[std::size_t(y) * cam.width + x] = wsum;
    }
  return out;
}

}  // namespace oracle
