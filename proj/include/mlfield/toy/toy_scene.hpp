#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mlfield/field/camera.hpp"
#include "mlfield/field/gaussian.hpp"
#include "mlfield/mask/hierarchy.hpp"
#include "mlfield/semantic/dictionary.hpp"
#include "mlfield/semantic/identity.hpp"
#include "mlfield/semantic/io.hpp"

// Procedural scenes with known ground truth: Gaussian blobs for objects and
// parts, a ring of cameras, and identity rasters derived from the blobs'
// compositing weights. Used by the demo command, the acceptance run and tests.
namespace mlfield::toy {

struct PartSpec {
  std::string label;
  Eigen::Vector3d offset;  // from the object centre
  double radius = 0.1;
  int gaussians = 6;
};

struct ObjectSpec {
  std::string label;
  Eigen::Vector3d center;
  double radius = 0.3;
  int gaussians = 12;  // body only, parts add their own
  std::vector<PartSpec> parts;
};

struct SceneSpec {
  std::vector<ObjectSpec> objects;
  int background_gaussians = 0;  // unlabeled floor splats
  // Unlabeled walls, floor and ceiling of a box this far from the scene
  // centre, so every view direction sees some surface; 0 = no room.
  double room_half_extent = 0.0;
  int views = 5;
  int width = 64;
  int height = 64;
  double focal = 60.0;
  double camera_distance = 3.0;
  double camera_elevation = 0.45;  // radians above the floor plane
  double camera_arc = 1.2;         // total azimuth spread, radians
  double gaussian_scale = 0.35;    // splat sigma relative to the blob radius
  float opacity = 0.95f;
  // A pixel takes a target's identity when that target holds at least this
  // share of the pixel's compositing weight.
  double identity_threshold = 0.5;
  std::uint64_t seed = 1;
};

// Desk with several labelled objects and parts; the demo default.
SceneSpec desk_spec();

struct ToyScene {
  field::Scene scene;
  std::vector<field::CameraPose> cameras;
  std::vector<std::uint32_t> object_of;  // per Gaussian, 0 = none
  std::vector<std::uint32_t> part_of;    // per Gaussian, 0 = none
  mask::Hierarchy hierarchy;              // from view 0, labels attached
  std::vector<semantic::IdentityFrame> identity;
  semantic::Propagation propagation;
};

// World frame: y points down (floor at y = 0, objects at negative y), cameras
// sit on an arc on the -z side looking at the scene centre. Throws
// InvalidInput when a target is not visible in view 0.
ToyScene generate(const SceneSpec& spec);

// 50 Gaussians, 3 targets (one frame-filling object with two parts), 5 views
// at 64x64. Front slats (part 2) overlap a tiled back (part 3) at a depth
// gap wide enough that the per-Gaussian depth sort never inverts them, so
// every covered pixel is saturated by a single target except along the
// slat edge.
ToyScene panel_scene();

// Sets every Gaussian's features to the codes of its object and part (zero
// for none): what a perfect feature optimizer would converge to.
void paint_codes(ToyScene& toy, const semantic::MappingDictionary& dict);

}  // namespace mlfield::toy
