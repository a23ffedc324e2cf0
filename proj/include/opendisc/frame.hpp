#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>

#include "opendisc/camera.hpp"
#include "opendisc/image.hpp"

namespace opendisc {

using Vec3f = Eigen::Vector3f;
using Rgb8 = Eigen::Matrix<std::uint8_t, 3, 1>;

inline Vec3f invalid_vec3() {
  return Vec3f::Constant(std::numeric_limits<float>::quiet_NaN());
}
inline bool is_valid(const Vec3f& v) { return std::isfinite(v.x()); }

/// Axial depth noise of a structured-light sensor at depth z (meters):
/// 0.0012 + 0.0019 (z - 0.4)^2.
inline double axial_noise_sigma(double z) {
  const double dz = z - 0.4;
  return 0.0012 + 0.0019 * dz * dz;
}

/// Two depths farther apart than this fraction of the nearer one belong to
/// different surfaces separated by an occlusion edge.
inline constexpr float kDepthDiscontinuity = 0.05f;

inline bool same_surface_depth(float a, float b) {
  return std::abs(a - b) <= kDepthDiscontinuity * std::min(a, b);
}

/// One RGBD observation with its derived per-pixel maps. Vertex and normal
/// maps are in the camera frame; invalid entries are NaN.
struct Frame {
  Image<Vec3f> color_lab;
  Image<float> depth;  // meters, 0 = missing
  Image<Vec3f> vertex_map;
  Image<Vec3f> normal_map;
  Intrinsics intrinsics;
  Pose pose;
  int timestamp = 0;

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }
  std::size_t valid_depth_count() const;
};

/// depth(u) * K^-1 (x, y, 1); NaN where depth is zero or non-finite.
/// Throws std::invalid_argument when the depth size differs from the intrinsics.
Image<Vec3f> compute_vertex_map(const Image<float>& depth, const Intrinsics& intr);

/// Central-difference normals oriented toward the camera (n . v <= 0). Border
/// pixels, pixels with an invalid neighbour, and degenerate cross products
/// (norm < 1e-9) are invalid.
Image<Vec3f> compute_normal_map(const Image<Vec3f>& vertex_map);

/// Edge-preserving smoothing of the depth that normals are estimated from.
/// A radius of 0 disables it.
struct NormalSmoothing {
  int radius = 0;              // pixels
  double sigma_space = 2.0;    // pixels
  double sigma_range_k = 10.0;  // range scale in units of axial_noise_sigma at the centre depth

  void validate() const;
};

/// Bilateral filter over valid depths. Missing depth stays missing and never
/// contributes to its neighbours.
Image<float> bilateral_filter_depth(const Image<float>& depth, const NormalSmoothing& params);

/// sRGB (D65) to CIELAB.
Vec3f srgb_to_lab(const Rgb8& rgb);
Image<Vec3f> srgb_to_lab(const Image<Rgb8>& rgb);

/// Builds a frame with all derived maps. The vertex map always comes from
/// the raw depth; normals come from the smoothed depth when `smoothing` is
/// enabled. Throws std::invalid_argument on mismatched image sizes or invalid
/// camera parameters.
Frame make_frame(const Image<Rgb8>& rgb, Image<float> depth, const Intrinsics& intr,
                 const Pose& pose, int timestamp, const NormalSmoothing& smoothing = {});

}  // namespace opendisc
