#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

#include "opendisc/frame.hpp"
#include "opendisc/image.hpp"

namespace opendisc {

/// Label value for pixels without valid depth.
inline constexpr int kNoSegment = -1;

struct SlicParams {
  int target_superpixels = 250;
  double alpha = 110.0;  // weight of the normal term
  double beta = 0.5;     // weight of the image-distance term
  int iterations = 5;

  void validate() const;
};

/// Aggregates of a connected pixel region. Vertex and normal are world frame.
struct Superpixel {
  int id = 0;
  int pixel_count = 0;
  int normal_count = 0;  // pixels contributing a valid normal
  Eigen::Vector3d color_lab = Eigen::Vector3d::Zero();
  Eigen::Vector3d vertex = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal_sum = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double mean_depth = 0.0;  // camera-frame z

  bool geometry_valid() const { return std::isfinite(normal.x()); }
};

/// Label image plus per-region aggregates. Labels run 0..segments.size()-1
/// in scanline order of first appearance; kNoSegment marks missing depth.
struct FrameSegmentation {
  Image<int> labels;
  std::vector<Superpixel> segments;
};

/// Ds = d_lab + alpha * d_n + beta * d_xy. A non-finite normal on either side
/// replaces d_n by 2, the diameter of the unit-normal sphere.
template <typename Scalar>
Scalar slic_distance(const Eigen::Matrix<Scalar, 3, 1>& lab_a,
                     const Eigen::Matrix<Scalar, 3, 1>& normal_a,
                     const Eigen::Matrix<Scalar, 2, 1>& xy_a,
                     const Eigen::Matrix<Scalar, 3, 1>& lab_b,
                     const Eigen::Matrix<Scalar, 3, 1>& normal_b,
                     const Eigen::Matrix<Scalar, 2, 1>& xy_b, Scalar alpha, Scalar beta) {
  const Scalar d_lab = (lab_a - lab_b).norm();
  const bool normals_ok = std::isfinite(normal_a.x()) && std::isfinite(normal_b.x());
  const Scalar d_n = normals_ok ? (normal_a - normal_b).norm() : Scalar(2);
  const Scalar d_xy = (xy_a - xy_b).norm();
  return d_lab + alpha * d_n + beta * d_xy;
}

/// RGBD SLIC over the valid-depth pixels of a frame. Superpixels are
/// 4-connected. Throws std::runtime_error("insufficient geometry") when fewer
/// than 1% of pixels carry depth.
FrameSegmentation run_slic(const Frame& frame, const SlicParams& params);

struct MergeThresholds {
  double sigma_lambda = 7.0;
  double sigma_phi = 0.8;
  double noise_k = 3.0;  // multiplier on the axial depth-noise model

  void validate() const;
};

struct MergePredicates {
  double lambda = 0.0;  // colour distance
  double psi = 0.0;     // offset along n_a
  double phi = 0.0;     // convexity
};

/// Colour distance, normal-direction offset and convexity of b seen from a:
///   lambda = |c_a - c_b|, psi = |(v_b - v_a) . n_a|,
///   phi = 1 if (v_b - v_a) . n_a > 0 else n_a . n_b.
/// A non-finite normal yields psi = inf, phi = -1.
template <typename Scalar>
MergePredicates merge_predicates(const Eigen::Matrix<Scalar, 3, 1>& color_a,
                                 const Eigen::Matrix<Scalar, 3, 1>& vertex_a,
                                 const Eigen::Matrix<Scalar, 3, 1>& normal_a,
                                 const Eigen::Matrix<Scalar, 3, 1>& color_b,
                                 const Eigen::Matrix<Scalar, 3, 1>& vertex_b,
                                 const Eigen::Matrix<Scalar, 3, 1>& normal_b) {
  MergePredicates p;
  p.lambda = static_cast<double>((color_a - color_b).norm());
  if (!std::isfinite(normal_a.x()) || !std::isfinite(normal_b.x())) {
    p.psi = std::numeric_limits<double>::infinity();
    p.phi = -1.0;
    return p;
  }
  const double offset = static_cast<double>((vertex_b - vertex_a).dot(normal_a));
  p.psi = std::abs(offset);
  p.phi = offset > 0.0 ? 1.0 : static_cast<double>(normal_a.dot(normal_b));
  return p;
}

/// Predicates between two superpixels. Superpixel normals face the camera;
/// the convexity test expects normals pointing into the surface, so both are
/// negated before evaluation.
MergePredicates merge_predicates(const Superpixel& a, const Superpixel& b);

/// k * (0.0012 + 0.0019 (z - 0.4)^2): axial depth noise scaled by k.
inline double sigma_psi(double depth, double k = 3.0) { return k * axial_noise_sigma(depth); }

/// True when the pair passes lambda, psi and phi in both directions, or, if
/// either side lacks geometry, when lambda < sigma_lambda / 2.
bool should_merge(const Superpixel& a, const Superpixel& b, const MergeThresholds& t);

/// Pixel-count weighted combination of two regions; normal re-normalised.
Superpixel combine(const Superpixel& a, const Superpixel& b);

/// Greedy merging of adjacent regions, smallest lambda first, ties broken by
/// the (min id, max id) pair. Stops when no adjacent pair qualifies.
FrameSegmentation agglomerate(const FrameSegmentation& superpixels, const MergeThresholds& t);

/// run_slic followed by agglomerate.
FrameSegmentation segment_frame(const Frame& frame, const SlicParams& slic,
                                const MergeThresholds& merge);

/// Recomputes aggregates for every label of `labels` from the frame maps and
/// renumbers labels in scanline order of first appearance.
FrameSegmentation summarize_labels(const Frame& frame, Image<int> labels);

}  // namespace opendisc
