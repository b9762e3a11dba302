#include "mlfield/field/gaussian.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Geometry>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"

namespace mlfield::field {

Eigen::Matrix3d FeatureGaussian::covariance() const {
  const Eigen::Quaterniond q(rotation[0], rotation[1], rotation[2], rotation[3]);
  const Eigen::Matrix3d r = q.normalized().toRotationMatrix();
  const Eigen::Vector3d s(scale[0], scale[1], scale[2]);
  const Eigen::Matrix3d m = r * s.asDiagonal();
  return m * m.transpose();
}

void validate(const FeatureGaussian& g) {
  auto finite = [](auto& arr) {
    for (float v : arr)
      if (!std::isfinite(v)) return false;
    return true;
  };
  if (!finite(g.mean) || !finite(g.scale) || !finite(g.rotation) || !std::isfinite(g.opacity) ||
      !finite(g.object_feature) || !finite(g.part_feature))
    throw InvalidInput("gaussian has non-finite values");
  double qn = 0;
  for (float v : g.rotation) qn += double(v) * v;
  if (std::abs(std::sqrt(qn) - 1.0) > 1e-6) throw InvalidInput("gaussian rotation is not a unit quaternion");
  for (float s : g.scale)
    if (!(s > 0.f)) throw InvalidInput("gaussian scales must be positive");
  if (!(g.opacity >= 0.f && g.opacity <= 1.f)) throw InvalidInput("gaussian opacity must lie in [0, 1]");
}

void validate(std::span<const FeatureGaussian> scene) {
  for (std::size_t i = 0; i < scene.size(); ++i) {
    try {
      validate(scene[i]);
    } catch (const InvalidInput& e) {
      throw InvalidInput("gaussian " + std::to_string(i) + ": " + e.what());
    }
  }
}

std::vector<std::uint8_t> serialize_scene(std::span<const FeatureGaussian> scene) {
  BinaryWriter out;
  out.put_bytes("MLFS");
  out.put(std::uint32_t{1});
  out.put(static_cast<std::uint32_t>(scene.size()));
  for (const auto& g : scene) {
    out.put_span(std::span<const float>(g.mean));
    out.put_span(std::span<const float>(g.scale));
    out.put_span(std::span<const float>(g.rotation));
    out.put(g.opacity);
    out.put_span(std::span<const float>(g.object_feature));
    out.put_span(std::span<const float>(g.part_feature));
  }
  return std::move(out).bytes();
}

Scene deserialize_scene(std::span<const std::uint8_t> bytes) {
  BinaryReader in(bytes);
  in.expect_magic("MLFS");
  if (in.get<std::uint32_t>() != 1) throw FormatError("unsupported scene file version");
  const auto n = in.get<std::uint32_t>();
  if (static_cast<std::size_t>(n) * 17 * sizeof(float) != in.remaining())
    throw FormatError("scene file size does not match its gaussian count");
  Scene scene(n);
  for (auto& g : scene) {
    in.get_span(std::span<float>(g.mean));
    in.get_span(std::span<float>(g.scale));
    in.get_span(std::span<float>(g.rotation));
    g.opacity = in.get<float>();
    in.get_span(std::span<float>(g.object_feature));
    in.get_span(std::span<float>(g.part_feature));
  }
  try {
    validate(scene);
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("scene file: ") + e.what());
  }
  return scene;
}

void write_scene(const std::filesystem::path& path, std::span<const FeatureGaussian> scene) {
  write_file_bytes(path, serialize_scene(scene));
}

Scene read_scene(const std::filesystem::path& path) { return deserialize_scene(read_file_bytes(path)); }

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  std::size_t size = 0;
};

std::size_t ply_type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},  {"uchar", 1},  {"int8", 1},   {"uint8", 1},   {"short", 2},   {"ushort", 2},
      {"int16", 2}, {"uint16", 2}, {"int", 4},    {"uint", 4},    {"int32", 4},   {"uint32", 4},
      {"float", 4}, {"float32", 4}, {"double", 8}, {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw FormatError("unsupported PLY property type '" + t + "'");
  return it->second;
}

double read_binary_value(const std::uint8_t* p, const std::string& t) {
  auto load = [p](auto v) {
    std::memcpy(&v, p, sizeof(v));
    return static_cast<double>(v);
  };
  if (t == "float" || t == "float32") return load(float{});
  if (t == "double" || t == "float64") return load(double{});
  if (t == "char" || t == "int8") return load(std::int8_t{});
  if (t == "uchar" || t == "uint8") return load(std::uint8_t{});
  if (t == "short" || t == "int16") return load(std::int16_t{});
  if (t == "ushort" || t == "uint16") return load(std::uint16_t{});
  if (t == "int" || t == "int32") return load(std::int32_t{});
  return load(std::uint32_t{});
}

FeatureGaussian from_splat_row(const std::map<std::string, double>& row) {
  auto get = [&](const char* name) {
    auto it = row.find(name);
    if (it == row.end()) throw FormatError(std::string("PLY vertex lacks property '") + name + "'");
    return it->second;
  };
  FeatureGaussian g;
  g.mean = {float(get("x")), float(get("y")), float(get("z"))};
  g.scale = {float(std::exp(get("scale_0"))), float(std::exp(get("scale_1"))), float(std::exp(get("scale_2")))};
  double q[4] = {get("rot_0"), get("rot_1"), get("rot_2"), get("rot_3")};
  const double qn = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(qn > 0)) throw FormatError("PLY vertex has a zero rotation quaternion");
  for (int i = 0; i < 4; ++i) g.rotation[i] = float(q[i] / qn);
  g.opacity = float(1.0 / (1.0 + std::exp(-get("opacity"))));
  return g;
}

}  // namespace

Scene parse_splat_ply(std::span<const std::uint8_t> bytes) {
  // Header is ASCII up to and including "end_header\n".
  const std::string_view all(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto end = all.find("end_header");
  if (all.substr(0, 3) != "ply" || end == std::string_view::npos) throw FormatError("not a PLY file");
  const auto body_start = all.find('\n', end);
  if (body_start == std::string_view::npos) throw FormatError("truncated PLY header");
  std::istringstream header{std::string(all.substr(0, end))};

  std::string format;
  std::size_t vertex_count = 0;
  std::vector<PlyProperty> props;
  bool in_vertex = false, vertex_seen = false;
  std::string line;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      ls >> format;
    } else if (word == "element") {
      std::string name;
      std::size_t count = 0;
      ls >> name >> count;
      if (vertex_seen && !in_vertex) continue;
      in_vertex = name == "vertex";
      if (in_vertex) {
        vertex_count = count;
        vertex_seen = true;
      } else if (!vertex_seen) {
        throw FormatError("PLY elements before 'vertex' are not supported");
      }
    } else if (word == "property" && in_vertex) {
      PlyProperty p;
      ls >> p.type;
      if (p.type == "list") throw FormatError("list properties on PLY vertices are not supported");
      ls >> p.name;
      p.size = ply_type_size(p.type);
      props.push_back(p);
    }
  }
  if (!vertex_seen) throw FormatError("PLY file has no vertex element");

  Scene scene;
  scene.reserve(vertex_count);
  std::map<std::string, double> row;
  if (format == "binary_little_endian") {
    std::size_t stride = 0;
    for (const auto& p : props) stride += p.size;
    const std::size_t offset = body_start + 1;
    if (bytes.size() < offset + stride * vertex_count) throw FormatError("truncated PLY vertex data");
    for (std::size_t v = 0; v < vertex_count; ++v) {
      const std::uint8_t* p = bytes.data() + offset + v * stride;
      for (const auto& prop : props) {
        row[prop.name] = read_binary_value(p, prop.type);
        p += prop.size;
      }
      scene.push_back(from_splat_row(row));
    }
  } else if (format == "ascii") {
    std::istringstream body{std::string(all.substr(body_start + 1))};
    for (std::size_t v = 0; v < vertex_count; ++v) {
      for (const auto& prop : props) {
        double value;
        if (!(body >> value)) throw FormatError("truncated PLY vertex data");
        row[prop.name] = value;
      }
      scene.push_back(from_splat_row(row));
    }
  } else {
    throw FormatError("unsupported PLY format '" + format + "'");
  }
  return scene;
}

Scene import_splat_ply(const std::filesystem::path& path) { return parse_splat_ply(read_file_bytes(path)); }

}  // namespace mlfield::field
