#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>

#include "aft/types.hpp"

namespace aft {

struct PixelPoint {
  double u{0.0};
  double v{0.0};
  double depth{0.0};  // camera-frame z, meters
};

/// Pinhole RGB-D camera.  Image x grows right (u), image y grows down (v),
/// camera z points into the scene.
struct PinholeCamera {
  int width{256};
  int height{192};
  double fx{230.0};
  double fy{230.0};
  double cx{128.0};
  double cy{96.0};
  RigidTransformd world_to_camera{RigidTransformd::identity()};

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return world_to_camera.apply(p_world);
  }

  /// Projection, or nullopt when the point is behind the camera or lands
  /// outside the image.
  std::optional<PixelPoint> project(const Eigen::Vector3d& p_world) const {
    const Eigen::Vector3d pc = to_camera(p_world);
    if (pc.z() <= 0.0) return std::nullopt;
    PixelPoint px;
    px.u = fx * pc.x() / pc.z() + cx;
    px.v = fy * pc.y() / pc.z() + cy;
    px.depth = pc.z();
    if (px.u < 0.0 || px.u >= width || px.v < 0.0 || px.v >= height) return std::nullopt;
    return px;
  }

  /// World point on the ray through pixel (u, v) at camera depth z.
  Eigen::Vector3d backproject(double u, double v, double depth) const {
    const Eigen::Vector3d pc((u - cx) / fx * depth, (v - cy) / fy * depth, depth);
    return world_to_camera.rotation.transpose() * (pc - world_to_camera.translation);
  }
};

/// Camera at `eye` looking toward `target`, with image y pointing along
/// world -up (rows grow downward in the image).
inline PinholeCamera look_at_camera(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                                    const Eigen::Vector3d& up, const PinholeCamera& intrinsics = {}) {
  const Eigen::Vector3d z_cam = (target - eye).normalized();
  Eigen::Vector3d x_cam = z_cam.cross(up);
  const double n = x_cam.norm();
  if (n < 1e-12) throw std::invalid_argument("look_at_camera: view direction parallel to up");
  x_cam /= n;
  const Eigen::Vector3d y_cam = z_cam.cross(x_cam);  // points along -up: rows grow downward

  PinholeCamera cam = intrinsics;
  Eigen::Matrix3d r_cw;  // rows are the camera axes in world coordinates
  r_cw.row(0) = x_cam;
  r_cw.row(1) = y_cam;
  r_cw.row(2) = z_cam;
  cam.world_to_camera.rotation = r_cw;
  cam.world_to_camera.translation = -(r_cw * eye);
  return cam;
}

}  // namespace aft
