#include "mlfield/toy/toy_scene.hpp"

#include <cmath>
#include <map>
#include <random>

#include <Eigen/Geometry>

#include "mlfield/common/error.hpp"
#include "mlfield/field/render.hpp"

namespace mlfield::toy {
namespace {

Eigen::Vector3d in_ball(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(-1, 1);
  for (;;) {
    Eigen::Vector3d p(u(rng), u(rng), u(rng));
    if (p.squaredNorm() <= 1) return p * radius;
  }
}

field::FeatureGaussian splat(std::mt19937_64& rng, const Eigen::Vector3d& centre, double blob_radius,
                             const SceneSpec& spec) {
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  field::FeatureGaussian g;
  const Eigen::Vector3d p = centre + in_ball(rng, blob_radius * 0.7);
  g.mean = {float(p.x()), float(p.y()), float(p.z())};
  for (auto& s : g.scale) s = float(blob_radius * spec.gaussian_scale * jitter(rng));
  g.rotation = {1.f, 0.f, 0.f, 0.f};
  g.opacity = spec.opacity;
  return g;
}

// Identity of each pixel: the target with the largest summed compositing
// weight, if it reaches the threshold share.
IdRaster dominant(const field::BlendWeights& bw, const std::vector<std::uint32_t>& label, double threshold) {
  IdRaster out(bw.width, bw.height, 0);
  std::map<std::uint32_t, double> acc;
  for (std::size_t p = 0; p + 1 < bw.offsets.size(); ++p) {
    acc.clear();
    for (auto k = bw.offsets[p]; k < bw.offsets[p + 1]; ++k) acc[label[bw.gaussian[k]]] += bw.weight[k];
    std::uint32_t best = 0;
    double best_w = 0;
    for (const auto& [id, w] : acc)
      if (id != 0 && w > best_w) {
        best = id;
        best_w = w;
      }
    if (best_w >= threshold) out[p] = best;
  }
  return out;
}

mask::CandidateMask region(const IdRaster& ids, std::uint32_t id, int frame_id) {
  BinaryRaster r(ids.width(), ids.height(), 0);
  for (std::size_t p = 0; p < ids.size(); ++p) r[p] = ids[p] == id;
  return mask::CandidateMask::from_pixels(frame_id, std::move(r));
}

// Identity frames, propagation and the view-0 hierarchy. Objects are ids
// 1..n, parts follow in object order.
void label_views(ToyScene& out, const std::vector<std::string>& object_labels,
                 const std::vector<std::vector<std::string>>& part_labels, double threshold) {
  const auto n_objects = static_cast<std::uint32_t>(object_labels.size());
  std::uint32_t next_part = n_objects + 1;
  for (const auto& pl : part_labels) next_part += static_cast<std::uint32_t>(pl.size());
  for (std::size_t v = 0; v < out.cameras.size(); ++v) {
    const int fid = static_cast<int>(v);
    const auto& cam = out.cameras[v];
    const auto bw = field::compute_blend_weights(out.scene, cam);
    semantic::IdentityFrame f{fid, dominant(bw, out.object_of, threshold), dominant(bw, out.part_of, threshold)};
    out.propagation.frames.push_back({fid, cam.width, cam.height});
    for (std::uint32_t id = 1; id < next_part; ++id) {
      const auto& raster = id <= n_objects ? f.object_ids : f.part_ids;
      auto m = region(raster, id, fid);
      if (m.area > 0) out.propagation.masks.push_back({fid, id, std::move(m)});
    }
    out.identity.push_back(std::move(f));
  }

  const auto& key = out.identity.front();
  std::vector<mask::CandidateMask> objects;
  std::vector<std::vector<mask::CandidateMask>> parts(n_objects);
  std::uint32_t pid = n_objects + 1;
  for (std::uint32_t i = 0; i < n_objects; ++i) {
    objects.push_back(region(key.object_ids, i + 1, 0));
    if (objects.back().area == 0) throw InvalidInput("object '" + object_labels[i] + "' is not visible in view 0");
    for (const auto& label : part_labels[i]) {
      parts[i].push_back(region(key.part_ids, pid++, 0));
      if (parts[i].back().area == 0) throw InvalidInput("part '" + label + "' is not visible in view 0");
    }
  }
  out.hierarchy = mask::build_hierarchy(std::move(objects), std::move(parts));
  for (std::uint32_t i = 0; i < n_objects; ++i) out.hierarchy.objects[i].label = object_labels[i];
  std::size_t k = 0;
  for (const auto& pl : part_labels)
    for (const auto& label : pl) out.hierarchy.parts[k++].label = label;
}

}  // namespace

SceneSpec desk_spec() {
  SceneSpec s;
  s.objects = {
      {"game controller", {-0.6, -0.15, 0.1}, 0.3, 16,
       {{"button", {0.1, -0.12, -0.05}, 0.07, 6}, {"joystick", {-0.15, -0.12, -0.05}, 0.08, 6}}},
      {"mug", {0.1, -0.3, 0.3}, 0.25, 14, {{"handle", {0.28, 0.0, 0.0}, 0.1, 6}}},
      {"apple", {0.6, -0.2, -0.2}, 0.2, 14, {}},
      {"lamp", {0.1, -0.6, 1.0}, 0.3, 16, {{"shade", {0.0, -0.25, 0.0}, 0.2, 8}}},
      {"book", {-0.4, -0.08, 0.9}, 0.3, 14, {}},
  };
  s.background_gaussians = 30;
  s.room_half_extent = 5.0;
  s.views = 8;
  s.width = 160;
  s.height = 120;
  s.focal = 140.0;
  s.camera_distance = 3.2;
  s.camera_arc = 1.6;
  return s;
}

ToyScene generate(const SceneSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  ToyScene out;
  std::uint32_t next_part = static_cast<std::uint32_t>(spec.objects.size()) + 1;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    const auto oid = static_cast<std::uint32_t>(i + 1);
    centroid += o.center;
    for (int k = 0; k < o.gaussians; ++k) {
      out.scene.push_back(splat(rng, o.center, o.radius, spec));
      out.object_of.push_back(oid);
      out.part_of.push_back(0);
    }
    for (const auto& p : o.parts) {
      for (int k = 0; k < p.gaussians; ++k) {
        out.scene.push_back(splat(rng, o.center + p.offset, p.radius, spec));
        out.object_of.push_back(oid);
        out.part_of.push_back(next_part);
      }
      ++next_part;
    }
  }
  if (!spec.objects.empty()) centroid /= double(spec.objects.size());

  // Flat floor splats around the objects.
  std::uniform_real_distribution<double> floor_u(-1.2, 1.2);
  for (int k = 0; k < spec.background_gaussians; ++k) {
    field::FeatureGaussian g;
    g.mean = {float(centroid.x() + floor_u(rng)), 0.05f, float(centroid.z() + floor_u(rng))};
    g.scale = {0.18f, 0.01f, 0.18f};
    g.opacity = spec.opacity;
    out.scene.push_back(g);
    out.object_of.push_back(0);
    out.part_of.push_back(0);
  }

  if (spec.room_half_extent > 0) {
    const double e = spec.room_half_extent;
    const int n = std::max(2, static_cast<int>(std::ceil(2 * e / 1.5)) + 1);
    const double sigma = 2 * e / (n - 1) * 0.7;
    for (int axis = 0; axis < 3; ++axis)
      for (double side : {-1.0, 1.0})
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            Eigen::Vector3d p = centroid;
            const int a = (axis + 1) % 3, b = (axis + 2) % 3;
            p[axis] += side * e;
            p[a] += -e + 2 * e * i / (n - 1);
            p[b] += -e + 2 * e * j / (n - 1);
            field::FeatureGaussian g;
            g.mean = {float(p.x()), float(p.y()), float(p.z())};
            g.scale = {float(sigma), float(sigma), float(sigma)};
            g.scale[axis] = 0.02f;
            g.opacity = spec.opacity;
            out.scene.push_back(g);
            out.object_of.push_back(0);
            out.part_of.push_back(0);
          }
  }

  const Eigen::Vector3d look(centroid.x(), centroid.y() * 0.5, centroid.z());
  for (int v = 0; v < spec.views; ++v) {
    const double az = spec.views > 1 ? -spec.camera_arc / 2 + spec.camera_arc * v / (spec.views - 1) : 0.0;
    // View 0 is the frontal one so every target is visible in the key frame.
    const double a = v == 0 ? 0.0 : az;
    const double d = spec.camera_distance;
    const Eigen::Vector3d eye = look + Eigen::Vector3d(d * std::cos(spec.camera_elevation) * std::sin(a),
                                                       -d * std::sin(spec.camera_elevation),
                                                       -d * std::cos(spec.camera_elevation) * std::cos(a));
    out.cameras.push_back(field::look_at(eye, look, {0, -1, 0}, spec.focal, spec.focal, spec.width, spec.height));
  }

  std::vector<std::string> object_labels;
  std::vector<std::vector<std::string>> part_labels;
  for (const auto& o : spec.objects) {
    object_labels.push_back(o.label);
    part_labels.emplace_back();
    for (const auto& p : o.parts) part_labels.back().push_back(p.label);
  }
  label_views(out, object_labels, part_labels, spec.identity_threshold);
  return out;
}

ToyScene panel_scene() {
  ToyScene out;
  auto add = [&](double x, double y, double z, double sx, double sy, std::uint32_t part) {
    field::FeatureGaussian g;
    g.mean = {float(x), float(y), float(z)};
    g.scale = {float(sx), float(sy), 0.05f};
    g.rotation = {1.f, 0.f, 0.f, 0.f};
    g.opacity = 0.99f;
    out.scene.push_back(g);
    out.object_of.push_back(1);
    out.part_of.push_back(part);
  };
  // back tiles, 4 x 5
  for (int i = 0; i < 4; ++i)
    for (int j = -2; j <= 2; ++j) add(0.1 + 0.9 * i, 1.2 * j, 0.7, 0.7, 0.9, 3);
  // front slats: a sharp edge at x = 0, widening leftwards, 3 rows each
  double x = -0.02, sx = 0.02;
  for (int col = 0; col < 10; ++col) {
    for (double y : {-1.4, 0.0, 1.4}) add(x, y, 0.0, sx, 1.2, 2);
    x -= 1.6 * sx;
    sx *= 1.35;
  }

  const Eigen::Vector3d look(0, 0, 0.05);
  const double d = 2.5, elevation = 0.1, arc = 0.3;
  for (int v = 0; v < 5; ++v) {
    const double a = v == 0 ? 0.0 : -arc / 2 + arc * (v - 1) / 3.0;
    const Eigen::Vector3d eye(d * std::cos(elevation) * std::sin(a), -d * std::sin(elevation),
                              -d * std::cos(elevation) * std::cos(a));
    out.cameras.push_back(field::look_at(eye, look, {0, -1, 0}, 64.0, 64.0, 64, 64));
  }
  label_views(out, {"cabinet"}, {{"door", "back panel"}}, 0.5);
  return out;
}

void paint_codes(ToyScene& toy, const semantic::MappingDictionary& dict) {
  auto code = [&](std::uint32_t id) {
    field::Feature3 f{0.f, 0.f, 0.f};
    if (id != 0) {
      const auto& c = dict.at(id).code.components;
      f = {c[0], c[1], c[2]};
    }
    return f;
  };
  for (std::size_t i = 0; i < toy.scene.size(); ++i) {
    toy.scene[i].object_feature = code(toy.object_of[i]);
    toy.scene[i].part_feature = code(toy.part_of[i]);
  }
}

}  // namespace mlfield::toy
