#include "mlfield/field/camera.hpp"

#include <Eigen/Geometry>

#include "mlfield/common/binary_io.hpp"
#include "mlfield/common/error.hpp"

namespace mlfield::field {

void validate(const CameraPose& cam) {
  const double orth = (cam.rotation.transpose() * cam.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(orth <= 1e-6)) throw InvalidInput("camera rotation is not orthonormal");
  if (!(std::abs(cam.rotation.determinant() - 1.0) <= 1e-6)) throw InvalidInput("camera rotation is not proper");
  if (!cam.translation.allFinite()) throw InvalidInput("camera translation is not finite");
  if (!(cam.fx > 0 && cam.fy > 0)) throw InvalidInput("focal lengths must be positive");
  if (cam.width <= 0 || cam.height <= 0) throw InvalidInput("camera resolution must be positive");
}

CameraPose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up, double fx,
                   double fy, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d x = (-up).cross(z);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  const Eigen::Vector3d y = z.cross(x);
  CameraPose cam;
  cam.rotation.col(0) = x;
  cam.rotation.col(1) = y;
  cam.rotation.col(2) = z;
  cam.translation = eye;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = (width - 1) / 2.0;
  cam.cy = (height - 1) / 2.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

nlohmann::json camera_to_json(const CameraPose& cam) {
  std::vector<double> r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(cam.rotation(i, j));
  return {{"R", r},
          {"T", {cam.translation.x(), cam.translation.y(), cam.translation.z()}},
          {"fx", cam.fx},
          {"fy", cam.fy},
          {"cx", cam.cx},
          {"cy", cam.cy},
          {"width", cam.width},
          {"height", cam.height}};
}

CameraPose camera_from_json(const nlohmann::json& j) {
  try {
    CameraPose cam;
    const auto r = j.at("R").get<std::vector<double>>();
    const auto t = j.at("T").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw FormatError("camera R needs 9 values and T needs 3");
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) cam.rotation(i, k) = r[i * 3 + k];
    cam.translation = {t[0], t[1], t[2]};
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    validate(cam);
    return cam;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed camera: ") + e.what());
  }
}

CameraPose read_camera_json(const std::filesystem::path& path) {
  try {
    return camera_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> serialize_cameras(const std::vector<CameraPose>& cams) {
  BinaryWriter out;
  out.put_bytes("MLFC");
  out.put(std::uint32_t{1});
  out.put(static_cast<std::uint32_t>(cams.size()));
  for (const auto& c : cams) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out.put(c.rotation(i, j));
    for (int i = 0; i < 3; ++i) out.put(c.translation[i]);
    out.put(c.fx);
    out.put(c.fy);
    out.put(c.cx);
    out.put(c.cy);
    out.put(static_cast<std::uint32_t>(c.width));
    out.put(static_cast<std::uint32_t>(c.height));
  }
  return std::move(out).bytes();
}

std::vector<CameraPose> deserialize_cameras(std::span<const std::uint8_t> bytes) {
  BinaryReader in(bytes);
  in.expect_magic("MLFC");
  if (in.get<std::uint32_t>() != 1) throw FormatError("unsupported cameras file version");
  const auto n = in.get<std::uint32_t>();
  std::vector<CameraPose> cams;
  for (std::uint32_t k = 0; k < n; ++k) {
    CameraPose c;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) c.rotation(i, j) = in.get<double>();
    for (int i = 0; i < 3; ++i) c.translation[i] = in.get<double>();
    c.fx = in.get<double>();
    c.fy = in.get<double>();
    c.cx = in.get<double>();
    c.cy = in.get<double>();
    c.width = static_cast<int>(in.get<std::uint32_t>());
    c.height = static_cast<int>(in.get<std::uint32_t>());
    try {
      validate(c);
    } catch (const InvalidInput& e) {
      throw FormatError("camera " + std::to_string(k) + ": " + e.what());
    }
    cams.push_back(c);
  }
  if (!in.at_end()) throw FormatError("trailing bytes after cameras");
  return cams;
}

void write_cameras(const std::filesystem::path& path, const std::vector<CameraPose>& cams) {
  write_file_bytes(path, serialize_cameras(cams));
}

std::vector<CameraPose> read_cameras(const std::filesystem::path& path) {
  return deserialize_cameras(read_file_bytes(path));
}

}  // namespace mlfield::field
