#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>

namespace opendisc {

/// Pinhole camera without distortion.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument unless fx, fy > 0 and the principal point
  /// lies strictly inside the image.
  void validate() const;

  /// Ray through pixel (x, y) scaled so that its z component is 1.
  template <typename Scalar>
  Eigen::Matrix<Scalar, 3, 1> ray(Scalar x, Scalar y) const {
    return {(x - Scalar(cx)) / Scalar(fx), (y - Scalar(cy)) / Scalar(fy), Scalar(1)};
  }

  /// Continuous pixel coordinates of a camera-frame point; nullopt behind the camera.
  template <typename Derived>
  std::optional<Eigen::Vector2d> project(const Eigen::MatrixBase<Derived>& p) const {
    const double z = static_cast<double>(p.z());
    if (!(z > 0.0)) return std::nullopt;
    return Eigen::Vector2d(fx * static_cast<double>(p.x()) / z + cx,
                           fy * static_cast<double>(p.y()) / z + cy);
  }

  /// Copy with focal lengths and principal point rescaled to a new resolution.
  Intrinsics scaled(int new_width, int new_height) const;

  bool operator==(const Intrinsics&) const = default;
};

/// Rigid camera-to-world transform. World axes: z up; camera axes: x right,
/// y down, z forward (optical axis).
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  /// Camera at `eye` looking at `target`, with world +z as the up hint.
  static Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

  /// Throws std::invalid_argument unless rotation is orthonormal with det +1 (tol 1e-6).
  void validate() const;
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  bool operator==(const Pose&) const = default;
};

/// World-frame position of a camera-frame point: R v + t.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> to_world_point(
    const Pose& pose, const Eigen::MatrixBase<Derived>& v) {
  using S = typename Derived::Scalar;
  return pose.rotation.cast<S>() * v + pose.translation.cast<S>();
}

/// World-frame direction of a camera-frame vector: R n.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> to_world_direction(
    const Pose& pose, const Eigen::MatrixBase<Derived>& n) {
  using S = typename Derived::Scalar;
  return pose.rotation.cast<S>() * n;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> to_camera_point(
    const Pose& pose, const Eigen::MatrixBase<Derived>& p) {
  using S = typename Derived::Scalar;
  return pose.rotation.transpose().cast<S>() * (p - pose.translation.cast<S>());
}

/// Rotation about world +z by `radians`; +90 deg maps (1,0,0) to (0,1,0).
Eigen::Matrix3d yaw_rotation(double radians);

}  // namespace opendisc
