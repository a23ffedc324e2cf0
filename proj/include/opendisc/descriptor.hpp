#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opendisc {

/// Thrown when a point set cannot support a local reference frame.
class DegenerateGeometry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMinLrfPoints = 10;
inline constexpr double kMinSecondEigenvalue = 1e-10;

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

/// PCA frame of a point set. Columns of `axes` are the principal directions
/// sorted by descending eigenvalue and form a right-handed basis.
template <typename Scalar>
struct LocalFrame {
  Eigen::Matrix<Scalar, 3, 1> origin;
  Eigen::Matrix<Scalar, 3, 3> axes;
  Eigen::Matrix<Scalar, 3, 1> eigenvalues;

  /// Coordinates of world points in this frame.
  Points3<Scalar> to_local(const Points3<Scalar>& points) const {
    return axes.transpose() * (points.colwise() - origin);
  }
};

namespace detail {

/// Flips `axis` so that most centred points project positively. A tied count
/// falls back to the sign of the third moment.
template <typename Scalar>
void disambiguate_sign(Eigen::Matrix<Scalar, 3, 1>& axis, const Points3<Scalar>& centred) {
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> proj = axis.transpose() * centred;
  const Eigen::Index positive = (proj.array() > Scalar(0)).count();
  const Eigen::Index negative = (proj.array() < Scalar(0)).count();
  if (negative > positive ||
      (negative == positive && proj.array().cube().sum() < Scalar(0))) {
    axis = -axis;
  }
}

}  // namespace detail

/// Local reference frame from the normalised covariance
/// C = 1/|U| sum (v - o)(v - o)^T of `points` (one point per column).
/// Throws DegenerateGeometry below kMinLrfPoints points or when the second
/// eigenvalue falls under kMinSecondEigenvalue.
template <typename Scalar>
LocalFrame<Scalar> estimate_lrf(const Points3<Scalar>& points) {
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  if (points.cols() < kMinLrfPoints) throw DegenerateGeometry("too few points for an LRF");

  LocalFrame<Scalar> frame;
  frame.origin = points.rowwise().mean();
  const Points3<Scalar> centred = points.colwise() - frame.origin;
  const Mat3 cov = centred * centred.transpose() / Scalar(points.cols());

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  if (solver.info() != Eigen::Success) throw DegenerateGeometry("eigendecomposition failed");
  // Eigen sorts ascending.
  frame.eigenvalues = solver.eigenvalues().reverse().cwiseMax(Scalar(0));
  if (frame.eigenvalues(1) < Scalar(kMinSecondEigenvalue)) {
    throw DegenerateGeometry("rank-deficient covariance");
  }
  Vec3 e1 = solver.eigenvectors().col(2);
  Vec3 e2 = solver.eigenvectors().col(1);
  detail::disambiguate_sign(e1, centred);
  detail::disambiguate_sign(e2, centred);
  frame.axes.col(0) = e1;
  frame.axes.col(1) = e2;
  frame.axes.col(2) = e1.cross(e2);
  return frame;
}

inline constexpr int kGoodBins = 5;

/// Length of the descriptor for `bins` bins per axis.
constexpr int good_length(int bins = kGoodBins) { return 3 * bins * bins; }

/// Orthographic projection histogram descriptor. Points are expressed in the
/// LRF and projected onto its yz, xz and xy planes (in that order); each
/// projection is binned on a bins x bins grid over [-L, L]^2, L being the
/// largest absolute local coordinate, and normalised to unit mass.
/// Entry (plane, a, b) sits at plane * bins^2 + bin(a) * bins + bin(b).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> good_descriptor(const Points3<Scalar>& points,
                                                         const LocalFrame<Scalar>& lrf,
                                                         int bins = kGoodBins) {
  if (bins <= 0) throw std::invalid_argument("good_descriptor: bins must be positive");
  const Points3<Scalar> local = lrf.to_local(points);
  const Scalar extent = local.cwiseAbs().maxCoeff();
  if (!(extent > Scalar(0)) || !std::isfinite(static_cast<double>(extent))) {
    throw DegenerateGeometry("point set has no extent");
  }
  auto bin = [&](Scalar c) {
    const int b = static_cast<int>(std::floor((c + extent) / (Scalar(2) * extent) * Scalar(bins)));
    return std::clamp(b, 0, bins - 1);
  };
  constexpr int kPlanes[3][2] = {{1, 2}, {0, 2}, {0, 1}};
  const int cells = bins * bins;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> desc =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(3 * cells);
  for (Eigen::Index i = 0; i < local.cols(); ++i) {
    for (int p = 0; p < 3; ++p) {
      const int a = bin(local(kPlanes[p][0], i));
      const int b = bin(local(kPlanes[p][1], i));
      desc(p * cells + a * bins + b) += Scalar(1);
    }
  }
  desc /= Scalar(local.cols());
  return desc;
}

}  // namespace opendisc
