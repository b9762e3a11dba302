#include "mlfield/nav/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <Eigen/Geometry>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"
#include "mlfield/common/parallel.hpp"

namespace mlfield::nav {
namespace {

constexpr double kMergeDistance = 1e-6;
constexpr double kWeightSlack = 1e-9;

void check_node(const KeypointGraph& g, std::uint32_t n) {
  if (n >= g.size()) throw NotFound("node " + std::to_string(n) + " is not in the graph");
}

// Distances to `target` over the undirected graph.
std::vector<double> distances_to(const std::vector<std::vector<std::pair<std::uint32_t, double>>>& adj,
                                 std::uint32_t target) {
  std::vector<double> dist(adj.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[target] = 0;
  open.push({0.0, target});
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, w] : adj[u])
      if (d + w < dist[v]) {
        dist[v] = d + w;
        open.push({dist[v], v});
      }
  }
  return dist;
}

}  // namespace

std::vector<std::vector<std::pair<std::uint32_t, double>>> KeypointGraph::adjacency() const {
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj(size());
  for (const auto& e : edges) {
    adj[e.u].push_back({e.v, e.weight});
    adj[e.v].push_back({e.u, e.weight});
  }
  for (auto& list : adj) std::sort(list.begin(), list.end());
  return adj;
}

std::optional<double> KeypointGraph::edge_weight(std::uint32_t a, std::uint32_t b) const {
  const Edge key{std::min(a, b), std::max(a, b), 0.0};
  auto it = std::lower_bound(edges.begin(), edges.end(), key,
                             [](const Edge& x, const Edge& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });
  if (it != edges.end() && it->u == key.u && it->v == key.v) return it->weight;
  return std::nullopt;
}

void KeypointGraph::validate() const {
  if (rotations.size() != nodes.size()) throw InvariantViolation("graph needs one rotation per node");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u >= e.v || e.v >= size()) throw InvariantViolation("edge " + std::to_string(i) + " has bad endpoints");
    if (i > 0 && std::tie(edges[i - 1].u, edges[i - 1].v) >= std::tie(e.u, e.v))
      throw InvariantViolation("edges are not sorted and unique");
    if (std::abs(e.weight - (nodes[e.u] - nodes[e.v]).norm()) > kWeightSlack)
      throw InvariantViolation("edge " + std::to_string(i) + " weight differs from its length");
  }
}

double mean_adjacent_spacing(std::span<const field::CameraPose> cameras) {
  if (cameras.size() < 2) throw InvalidInput("the dilation step needs at least two training cameras");
  double sum = 0;
  for (std::size_t i = 1; i < cameras.size(); ++i) sum += (cameras[i].translation - cameras[i - 1].translation).norm();
  return sum / double(cameras.size() - 1);
}

KeypointGraph dilate_keypoints(std::span<const field::CameraPose> cameras, std::optional<double> step) {
  KeypointGraph g;
  g.step = step ? *step : mean_adjacent_spacing(cameras);
  if (!(g.step >= 0) || !std::isfinite(g.step)) throw InvalidInput("dilation step must be finite and non-negative");
  auto add = [&](const Eigen::Vector3d& p, const Eigen::Matrix3d& r) {
    for (const auto& q : g.nodes)
      if ((q - p).norm() <= kMergeDistance) return;
    g.nodes.push_back(p);
    g.rotations.push_back(r);
  };
  for (const auto& c : cameras) add(c.translation, c.rotation);
  const double h = g.step / 2;
  for (const auto& c : cameras)
    for (int axis = 0; axis < 3; ++axis)
      for (double sign : {1.0, -1.0}) {
        Eigen::Vector3d p = c.translation;
        p[axis] += sign * h;
        add(p, c.rotation);
      }
  return g;
}

Eigen::Matrix3d facing(const Eigen::Vector3d& direction) {
  const Eigen::Vector3d z = direction.normalized();
  Eigen::Vector3d x = Eigen::Vector3d(0, 1, 0).cross(z);
  if (x.norm() < 1e-9) x = Eigen::Vector3d(1, 0, 0);
  x.normalize();
  Eigen::Matrix3d r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return r;
}

field::CameraPose probe_camera(const field::CameraPose& like, const Eigen::Vector3d& position,
                               const Eigen::Matrix3d& rotation) {
  field::CameraPose cam = like;
  cam.rotation = rotation;
  cam.translation = position;
  const int w = std::min(kProbeWindow, like.width), h = std::min(kProbeWindow, like.height);
  const int x0 = (like.width - w) / 2, y0 = (like.height - h) / 2;
  cam.cx -= x0;
  cam.cy -= y0;
  cam.width = w;
  cam.height = h;
  return cam;
}

Connectivity check_connectivity(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const DepthRenderer& render,
                                const field::CameraPose& intrinsics, int samples) {
  const double length = (b - a).norm();
  if (length == 0) return {true, 0.0};
  if (samples < 2) throw InvalidInput("connectivity needs at least two samples");
  const auto rot = facing(b - a);
  for (int i = 0; i < samples; ++i) {
    const double t = double(i) / (samples - 1);
    const Eigen::Vector3d p = i == samples - 1 ? b : Eigen::Vector3d(a + t * (b - a));
    const auto depth = render(probe_camera(intrinsics, p, rot));
    for (std::size_t k = 0; k < depth.size(); ++k)
      if (!(depth[k] > 0)) return {false, 0.0};
  }
  return {true, length};
}

void build_edges(KeypointGraph& graph, const DepthRenderer& render, const field::CameraPose& intrinsics,
                 const GraphOptions& options) {
  const double radius = options.radius_factor * graph.step;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
  for (std::uint32_t u = 0; u < graph.size(); ++u)
    for (std::uint32_t v = u + 1; v < graph.size(); ++v)
      if ((graph.nodes[u] - graph.nodes[v]).norm() <= radius) candidates.push_back({u, v});
  std::vector<Connectivity> result(candidates.size());
  parallel_for(
      candidates.size(),
      [&](std::size_t i) {
        result[i] = check_connectivity(graph.nodes[candidates[i].first], graph.nodes[candidates[i].second], render,
                                       intrinsics, options.samples);
      },
      options.threads);
  graph.edges.clear();
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (result[i].connected) graph.edges.push_back({candidates[i].first, candidates[i].second, result[i].weight});
}

std::optional<NavPath> shortest_path(const KeypointGraph& graph, std::uint32_t from, std::uint32_t to) {
  check_node(graph, from);
  check_node(graph, to);
  const auto adj = graph.adjacency();
  const auto dist = distances_to(adj, to);
  if (!std::isfinite(dist[from])) return std::nullopt;

  // Walk forward taking the smallest neighbour that stays on a shortest path.
  NavPath path;
  path.keypoints.push_back(from);
  std::vector<bool> seen(graph.size(), false);
  seen[from] = true;
  std::uint32_t u = from;
  while (u != to) {
    const double slack = 1e-12 * (1.0 + dist[u]);
    std::optional<std::pair<std::uint32_t, double>> next;
    for (const auto& [v, w] : adj[u])
      if (!seen[v] && std::abs(w + dist[v] - dist[u]) <= slack) {
        next = {{v, w}};
        break;
      }
    if (!next) throw InvariantViolation("shortest path walk lost its way");
    u = next->first;
    seen[u] = true;
    path.keypoints.push_back(u);
    path.total_length += next->second;
  }
  return path;
}

std::uint32_t nearest_node(const KeypointGraph& graph, const Eigen::Vector3d& p) {
  if (graph.nodes.empty()) throw InvalidInput("graph has no nodes");
  std::uint32_t best = 0;
  for (std::uint32_t i = 1; i < graph.size(); ++i)
    if ((graph.nodes[i] - p).squaredNorm() < (graph.nodes[best] - p).squaredNorm()) best = i;
  return best;
}

std::vector<std::uint8_t> serialize_graph(const KeypointGraph& graph) {
  BinaryWriter out;
  out.put_bytes("MLFN");
  out.put(std::uint32_t{1});
  out.put(graph.step);
  out.put(static_cast<std::uint32_t>(graph.nodes.size()));
  out.put(static_cast<std::uint32_t>(graph.edges.size()));
  for (std::size_t n = 0; n < graph.nodes.size(); ++n) {
    for (int i = 0; i < 3; ++i) out.put(graph.nodes[n][i]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.put(graph.rotations[n](i, j));
  }
  for (const auto& e : graph.edges) {
    out.put(e.u);
    out.put(e.v);
    out.put(e.weight);
  }
  return std::move(out).bytes();
}

KeypointGraph deserialize_graph(std::span<const std::uint8_t> bytes) {
  BinaryReader in(bytes);
  in.expect_magic("MLFN");
  if (in.get<std::uint32_t>() != 1) throw FormatError("unsupported graph file version");
  KeypointGraph g;
  g.step = in.get<double>();
  const auto n = in.get<std::uint32_t>();
  const auto m = in.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < n; ++k) {
    Eigen::Vector3d p;
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i) p[i] = in.get<double>();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = in.get<double>();
    g.nodes.push_back(p);
    g.rotations.push_back(r);
  }
  for (std::uint32_t k = 0; k < m; ++k) {
    Edge e;
    e.u = in.get<std::uint32_t>();
    e.v = in.get<std::uint32_t>();
    e.weight = in.get<double>();
    g.edges.push_back(e);
  }
  if (!in.at_end()) throw FormatError("trailing bytes after graph");
  try {
    g.validate();
  } catch (const InvariantViolation& e) {
    throw FormatError(std::string("graph file: ") + e.what());
  }
  return g;
}

void write_graph(const std::filesystem::path& path, const KeypointGraph& graph) {
  write_file_bytes(path, serialize_graph(graph));
}

KeypointGraph read_graph(const std::filesystem::path& path) { return deserialize_graph(read_file_bytes(path)); }

}  // namespace mlfield::nav
