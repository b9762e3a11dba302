#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"
#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/field/camera.hpp"
#include "mlfield/field/gaussian.hpp"
#include "mlfield/field/loss.hpp"
#include "mlfield/field/optimize.hpp"
#include "mlfield/field/render.hpp"
#include "render_oracle.hpp"
#include "temp_dir.hpp"

using namespace mlfield;
using namespace mlfield::field;
using mlfield::semantic::TargetLevel;
using oracle::brute_force;
using oracle::random_scene;

namespace {

CameraPose identity_camera(int w, int h, double f = 50.0) {
  CameraPose c;
  c.fx = c.fy = f;
  c.cx = (w - 1) / 2.0;
  c.cy = (h - 1) / 2.0;
  c.width = w;
  c.height = h;
  return c;
}

FeatureGaussian gaussian_at(double x, double y, double z, double s, float opacity, Feature3 f = {0, 0, 0}) {
  FeatureGaussian g;
  g.mean = {float(x), float(y), float(z)};
  g.scale = {float(s), float(s), float(s)};
  g.opacity = opacity;
  g.object_feature = f;
  g.part_feature = {f[2], f[1], f[0]};
  return g;
}

FeatureImage random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0, 1);
  FeatureImage img(w, h);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

}  // namespace

TEST_CASE("camera validation and file formats") {
  auto cam = look_at({1, -2, 0.5}, {0, 0, 3}, {0, -1, 0}, 40, 42, 32, 24);
  CHECK_NOTHROW(validate(cam));
  CHECK((cam.to_camera({0, 0, 3}).head<2>().norm() < 1e-12));
  CHECK(cam.to_camera({0, 0, 3}).z() > 0);
  // World up (-y) maps to image up.
  CHECK(cam.to_camera(Eigen::Vector3d(0, -1, 3)).y() < 0);
  CHECK(camera_from_json(camera_to_json(cam)) == cam);
  TempDir dir;
  std::vector<CameraPose> cams{cam, identity_camera(8, 8)};
  write_cameras(dir / "c.bin", cams);
  CHECK(read_cameras(dir / "c.bin") == cams);

  auto bad = cam;
  bad.rotation(0, 0) *= 1.01;
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  bad = cam;
  bad.rotation.col(0) *= -1;  // det -1
  CHECK_THROWS_AS(validate(bad), InvalidInput);
  CHECK_THROWS_AS(deserialize_cameras(serialize_cameras({bad})), FormatError);
}

TEST_CASE("project_gaussian examples") {
  const auto cam = identity_camera(64, 48, 60);
  SUBCASE("on the optical axis projects to the principal point") {
    const auto p = project_gaussian(gaussian_at(0, 0, 4, 0.1, 1), cam);
    REQUIRE(p);
    CHECK(p->mean.x() == doctest::Approx(cam.cx));
    CHECK(p->mean.y() == doctest::Approx(cam.cy));
    CHECK(p->depth == doctest::Approx(4));
  }
  SUBCASE("isotropic covariance closed form") {
    for (double z : {1.5, 3.0, 7.0})
      for (double s : {0.01, 0.1, 0.5}) {
        const auto p = project_gaussian(gaussian_at(0, 0, z, s, 1), cam);
        REQUIRE(p);
        CHECK(p->covariance(0, 0) == doctest::Approx(std::pow(cam.fx * s / z, 2) + 0.3).epsilon(1e-6));
        CHECK(p->covariance(1, 1) == doctest::Approx(std::pow(cam.fy * s / z, 2) + 0.3).epsilon(1e-6));
        CHECK(std::abs(p->covariance(0, 1)) < 1e-9);
      }
  }
  SUBCASE("behind the camera is culled") {
    CHECK_FALSE(project_gaussian(gaussian_at(0, 0, -1, 0.1, 1), cam));
    CHECK_FALSE(project_gaussian(gaussian_at(0, 0, 0.005, 0.1, 1), cam));
  }
  SUBCASE("rotated camera, point on its forward axis") {
    auto rc = look_at({2, 1, -3}, {-1, 0.5, 2}, {0, -1, 0}, 55, 55, 40, 30);
    const Eigen::Vector3d on_axis = rc.translation + 3.0 * rc.forward();
    const auto p = project_gaussian(gaussian_at(on_axis.x(), on_axis.y(), on_axis.z(), 0.05, 1), rc);
    REQUIRE(p);
    CHECK(p->mean.x() == doctest::Approx(rc.cx).epsilon(1e-5));
    CHECK(p->mean.y() == doctest::Approx(rc.cy).epsilon(1e-5));
    CHECK(p->depth == doctest::Approx(3.0).epsilon(1e-5));
  }
  SUBCASE("off-axis mean follows the pinhole model") {
    const auto p = project_gaussian(gaussian_at(0.5, -0.25, 2, 0.05, 1), cam);
    REQUIRE(p);
    CHECK(p->mean.x() == doctest::Approx(cam.cx + 60 * 0.25));
    CHECK(p->mean.y() == doctest::Approx(cam.cy - 60 * 0.125));
  }
}

TEST_CASE("render examples") {
  const auto cam = identity_camera(20, 20, 20);
  SUBCASE("single opaque gaussian: alpha saturates at the clamp") {
    Scene s{gaussian_at(0, 0, 2, 50, 1, {0.2f, 0.4f, 0.6f})};
    const auto f = render_feature_frame(s, cam, TargetLevel::Object, {true});
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        CHECK(f.features.at(x, y, 0) == doctest::Approx(0.99 * 0.2f).epsilon(1e-5));
        CHECK(f.features.at(x, y, 2) == doctest::Approx(0.99 * 0.6f).epsilon(1e-5));
        CHECK((*f.depth)(x, y) == doctest::Approx(0.99 * 2).epsilon(1e-5));
      }
  }
  SUBCASE("two gaussians: front alpha 0.5") {
    Scene s{gaussian_at(0, 0, 3, 50, 1, {0, 0, 1}), gaussian_at(0, 0, 2, 50, 0.5, {1, 0, 0})};
    const auto f = render_feature_frame(s, cam, TargetLevel::Object);
    // Front weight 0.5 (times the near-unity Gaussian falloff), back weight 0.5 * 0.99.
    CHECK(f.features.at(10, 10, 0) == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(f.features.at(10, 10, 2) == doctest::Approx(0.5 * 0.99).epsilon(1e-4));
  }
  SUBCASE("empty scene") {
    const auto f = render_feature_frame({}, cam, TargetLevel::Part, {true});
    CHECK(std::all_of(f.features.values().begin(), f.features.values().end(), [](double v) { return v == 0; }));
    CHECK(std::all_of(f.depth->pixels().begin(), f.depth->pixels().end(), [](double v) { return v == 0; }));
  }
}

TEST_CASE("tiled compositing agrees with exhaustive evaluation") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    const auto scene = random_scene(rng, 60);
    const auto cam = look_at({0.2 * trial, -0.1, -0.5}, {0, 0, 3}, {0, -1, 0}, 40, 40, 48, 37);
    for (auto level : {TargetLevel::Object, TargetLevel::Part}) {
      const auto fast = render_feature_frame(scene, cam, level);
      const auto slow = brute_force(scene, cam, level);
      double worst = 0;
      for (std::size_t i = 0; i < fast.features.values().size(); ++i)
        worst = std::max(worst, std::abs(fast.features.values()[i] - slow.features.values()[i]));
      CHECK(worst <= 1e-4);
    }
    const auto bw = compute_blend_weights(scene, cam);
    for (int p = 0; p < cam.width * cam.height; ++p) {
      double sum = 0;
      for (auto k = bw.offsets[p]; k < bw.offsets[p + 1]; ++k) sum += bw.weight[k];
      REQUIRE(sum >= 0.0);
      REQUIRE(sum <= 1.0 + 1e-6);
    }
    const auto via_weights = apply_blend_weights(bw, scene, TargetLevel::Object);
    const auto direct = render_feature_frame(scene, cam, TargetLevel::Object);
    for (std::size_t i = 0; i < direct.features.values().size(); ++i)
      REQUIRE(std::abs(via_weights.values()[i] - direct.features.values()[i]) < 1e-5);
  }
}

TEST_CASE("rendering is deterministic across thread counts and counted") {
  std::mt19937_64 rng(3);
  auto scene = random_scene(rng, 80);
  // Coincident depths exercise the index tie-break.
  scene.push_back(scene[5]);
  scene.back().object_feature = {1, 0, 0};
  const auto cam = identity_camera(50, 40, 40);
  const auto before = render_invocations();
  const auto a = render_feature_frame(scene, cam, TargetLevel::Object, {true, 1});
  const auto b = render_feature_frame(scene, cam, TargetLevel::Object, {true, 4});
  CHECK(a.features == b.features);
  CHECK(*a.depth == *b.depth);
  CHECK(render_invocations() == before + 2);
  const auto both = render_both_levels(scene, cam);
  CHECK(both.object.features == a.features);
  CHECK(both.part.features == render_feature_frame(scene, cam, TargetLevel::Part).features);
}

TEST_CASE("depth is zero where nothing is hit") {
  const auto cam = identity_camera(30, 30, 30);
  Scene s{gaussian_at(0.5, 0.5, 2, 0.05, 1)};
  const auto d = render_depth(s, cam);
  CHECK(d(0, 0) == 0.0);
  const int px = int(std::lround(cam.cx + 30 * 0.25)), py = px;
  CHECK(d(px, py) > 1.5);
}

TEST_CASE("scene file round trip, validation and splat import") {
  std::mt19937_64 rng(8);
  const auto scene = random_scene(rng, 10);
  TempDir dir;
  write_scene(dir / "s.bin", scene);
  CHECK(read_scene(dir / "s.bin") == scene);

  auto bad = scene;
  bad[3].scale[1] = 0;
  CHECK_THROWS_AS(validate(std::span<const FeatureGaussian>(bad)), InvalidInput);
  bad = scene;
  bad[0].rotation = {1, 1, 0, 0};
  CHECK_THROWS_AS(deserialize_scene(serialize_scene(bad)), FormatError);
  bad = scene;
  bad[0].opacity = 1.5f;
  CHECK_THROWS_AS(validate(bad[0]), InvalidInput);

  // Binary splat export with an extra colour property in the middle.
  std::string header =
      "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
      "property float f_dc_0\nproperty float opacity\nproperty float scale_0\nproperty float scale_1\n"
      "property float scale_2\nproperty float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\n"
      "end_header\n";
  BinaryWriter w;
  w.put_bytes(header);
  for (int v = 0; v < 2; ++v) {
    const float row[] = {1.f + v, 2.f, 3.f, 0.7f, 0.f, std::log(0.5f), std::log(0.25f), 0.f, 2.f, 0.f, 0.f, 0.f};
    w.put_span(std::span<const float>(row));
  }
  const auto imported = parse_splat_ply(w.bytes());
  REQUIRE(imported.size() == 2);
  CHECK(imported[1].mean[0] == 2.f);
  CHECK(imported[0].scale[0] == doctest::Approx(0.5));
  CHECK(imported[0].scale[1] == doctest::Approx(0.25));
  CHECK(imported[0].scale[2] == doctest::Approx(1.0));
  CHECK(imported[0].rotation[0] == doctest::Approx(1.0));
  CHECK(imported[0].opacity == doctest::Approx(0.5));
  CHECK_NOTHROW(validate(std::span<const FeatureGaussian>(imported)));

  std::string ascii =
      "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
      "property float scale_0\nproperty float scale_1\nproperty float scale_2\nproperty float rot_0\n"
      "property float rot_1\nproperty float rot_2\nproperty float rot_3\nproperty float opacity\nend_header\n"
      "0 0 1 0 0 0 0 0 0 1 10\n";
  const auto a = parse_splat_ply(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(ascii.data()),
                                                               ascii.size()));
  REQUIRE(a.size() == 1);
  CHECK(a[0].rotation[3] == doctest::Approx(1.0));
  CHECK(a[0].opacity > 0.99f);
  const std::string junk = "not a ply";
  CHECK_THROWS_AS(parse_splat_ply(std::span<const std::uint8_t>(
                      reinterpret_cast<const std::uint8_t*>(junk.data()), junk.size())),
                  FormatError);
}

TEST_CASE("loss examples") {
  std::mt19937_64 rng(1);
  const auto a = random_image(rng, 12, 9);
  SUBCASE("identical frames") {
    const auto r = compute_loss(a, a, {});
    CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(r.ssim == doctest::Approx(1.0));
    for (double g : r.gradient.values()) CHECK(std::abs(g) < 1e-12);
  }
  SUBCASE("L1 closed form") {
    auto b = a;
    for (auto& v : b.values()) v += 0.1;
    LossConfig cfg;
    cfg.lambda = 0;
    CHECK(compute_loss(a, b, cfg).value == doctest::Approx(0.1).epsilon(1e-12));
  }
  SUBCASE("resolution mismatch") { CHECK_THROWS_AS(compute_loss(a, FeatureImage(3, 3), {}), InvalidInput); }
}

TEST_CASE("loss gradient matches central differences") {
  std::mt19937_64 rng(12);
  for (double lambda : {0.0, 0.2, 1.0}) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto x = random_image(rng, 8, 8), y = random_image(rng, 8, 8);
      LossConfig cfg;
      cfg.lambda = lambda;
      const auto r = compute_loss(x, y, cfg);
      const double h = 1e-6;
      double worst = 0;
      for (std::size_t i = 0; i < x.values().size(); ++i) {
        auto xp = x, xm = x;
        xp.values()[i] += h;
        xm.values()[i] -= h;
        const double fd = (compute_loss(xp, y, cfg, false).value - compute_loss(xm, y, cfg, false).value) / (2 * h);
        const double an = r.gradient.values()[i];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10}));
      }
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("ssim of a window against a straightforward 2D evaluation") {
  std::mt19937_64 rng(4);
  const auto a = random_image(rng, 13, 11), b = random_image(rng, 13, 11);
  // Direct 11x11 window sums with zero padding.
  double g[11][11], gs = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) gs += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  double total = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 11; ++y)
      for (int x = 0; x < 13; ++x) {
        double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const int u = x + j - 5, v = y + i - 5;
            if (u < 0 || v < 0 || u >= 13 || v >= 11) continue;
            const double w = g[i][j] / gs, p = a.at(u, v, c), q = b.at(u, v, c);
            mx += w * p;
            my += w * q;
            xx += w * p * p;
            yy += w * q * q;
            xy += w * p * q;
          }
        const double c1 = 1e-4, c2 = 9e-4;
        total += (2 * mx * my + c1) * (2 * (xy - mx * my) + c2) /
                 ((mx * mx + my * my + c1) * ((xx - mx * mx) + (yy - my * my) + c2));
      }
  CHECK(ssim(a, b) == doctest::Approx(total / (13 * 11 * 3)).epsilon(1e-10));
}

TEST_CASE("optimize_features") {
  const auto cam = identity_camera(8, 8, 8);
  Scene scene{gaussian_at(0, 0, 2, 100, 1)};
  FeatureImage obj(8, 8), part(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      obj.set_pixel(x, y, {0.3, 0.5, 0.1});
      part.set_pixel(x, y, {0.9, 0.2, 0.6});
    }
  std::vector<TrainingView> views{{cam, obj, part}};

  SUBCASE("zero iterations leaves the scene alone") {
    auto copy = scene;
    TrainConfig cfg;
    cfg.iterations = 0;
    optimize_features(copy, views, cfg);
    CHECK(copy == scene);
  }
  SUBCASE("single gaussian fits a constant code") {
    TrainConfig cfg;
    cfg.iterations = 500;
    optimize_features(scene, views, cfg);
    const auto f = render_both_levels(scene, cam);
    for (int c = 0; c < 3; ++c) {
      CHECK(std::abs(f.object.features.at(4, 4, c) - obj.at(4, 4, c)) <= 1e-3);
      CHECK(std::abs(f.part.features.at(4, 4, c) - part.at(4, 4, c)) <= 1e-3);
    }
  }
  SUBCASE("errors") {
    TrainConfig cfg;
    CHECK_THROWS_AS(optimize_features(scene, {}, cfg), InvalidInput);
    std::vector<TrainingView> wrong{{cam, FeatureImage(4, 4), FeatureImage(4, 4)}};
    CHECK_THROWS_AS(optimize_features(scene, wrong, cfg), InvalidInput);
  }
}
