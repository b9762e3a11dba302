#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlfield/common/raster.hpp"
#include "mlfield/field/camera.hpp"

namespace mlfield::nav {

struct Edge {
  std::uint32_t u = 0;  // u < v; the graph is undirected
  std::uint32_t v = 0;
  double weight = 0.0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

// Navigation keypoints: training camera centres plus their dilations. Every
// node carries the rotation of the camera it came from.
struct KeypointGraph {
  std::vector<Eigen::Vector3d> nodes;
  std::vector<Eigen::Matrix3d> rotations;
  std::vector<Edge> edges;  // sorted by (u, v)
  double step = 0.0;        // s, mean spacing of consecutive training cameras

  std::size_t size() const { return nodes.size(); }
  // Neighbours of each node as (node, weight), ascending node index.
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adjacency() const;
  std::optional<double> edge_weight(std::uint32_t a, std::uint32_t b) const;
  // Throws InvariantViolation on bad indices, duplicate edges or weights that
  // differ from the endpoint distance by more than 1e-9.
  void validate() const;

  friend bool operator==(const KeypointGraph&, const KeypointGraph&) = default;
};

// Mean distance between consecutive camera centres in input order. Throws
// InvalidInput for fewer than two cameras.
double mean_adjacent_spacing(std::span<const field::CameraPose> cameras);

// Camera centres followed by six points at +-s/2 along each world axis per
// centre, in centre order then (+x, -x, +y, -y, +z, -z). Points within 1e-6
// of an earlier point are dropped. `step` overrides s (needed for a single
// camera).
KeypointGraph dilate_keypoints(std::span<const field::CameraPose> cameras, std::optional<double> step = std::nullopt);

// Depth raster for a camera; must be safe to call concurrently.
using DepthRenderer = std::function<Raster<double>(const field::CameraPose&)>;

inline constexpr int kConnectivitySamples = 8;
inline constexpr int kProbeWindow = 9;
inline constexpr double kEdgeRadiusFactor = 1.5;

// Rotation whose optical axis is `direction`, world up (0, -1, 0).
Eigen::Matrix3d facing(const Eigen::Vector3d& direction);

// Camera with the intrinsics of `like` cropped to the central probe window.
// Rendering it gives exactly the window's pixels of the full-size view.
field::CameraPose probe_camera(const field::CameraPose& like, const Eigen::Vector3d& position,
                               const Eigen::Matrix3d& rotation);

struct Connectivity {
  bool connected = false;
  double weight = 0.0;
};

// Samples `samples` points on a->b (both ends included), looking along a->b
// through `intrinsics`. Disconnected if any probe window holds a depth <= 0.
// a == b is connected with weight 0.
Connectivity check_connectivity(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const DepthRenderer& render,
                                const field::CameraPose& intrinsics, int samples = kConnectivitySamples);

struct GraphOptions {
  double radius_factor = kEdgeRadiusFactor;  // candidate pairs within radius_factor * s
  int samples = kConnectivitySamples;
  unsigned threads = 0;
};

// Tests every node pair within the radius and keeps the connected ones.
void build_edges(KeypointGraph& graph, const DepthRenderer& render, const field::CameraPose& intrinsics,
                 const GraphOptions& options = {});

struct NavPath {
  std::vector<std::uint32_t> keypoints;
  double total_length = 0.0;
};

// Minimal total weight; among equal-weight paths the lexicographically
// smallest node sequence. nullopt when `to` is unreachable. Throws NotFound
// for unknown nodes.
std::optional<NavPath> shortest_path(const KeypointGraph& graph, std::uint32_t from, std::uint32_t to);

// Node closest to `p`, lowest index on ties. Throws InvalidInput on an empty graph.
std::uint32_t nearest_node(const KeypointGraph& graph, const Eigen::Vector3d& p);

// "MLFN" u32 version(=1) f64 step u32 node_count u32 edge_count,
//   per node 3 x f64 position, 9 x f64 rotation row-major,
//   per edge u32 u, u32 v, f64 weight
std::vector<std::uint8_t> serialize_graph(const KeypointGraph& graph);
KeypointGraph deserialize_graph(std::span<const std::uint8_t> bytes);
void write_graph(const std::filesystem::path& path, const KeypointGraph& graph);
KeypointGraph read_graph(const std::filesystem::path& path);

}  // namespace mlfield::nav
