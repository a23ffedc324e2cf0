#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <vector>

#include "opendisc/descriptor.hpp"

namespace opendisc {

inline constexpr int kGeoDim = good_length();
inline constexpr int kCnnDim = 64;
inline constexpr int kUnlabeled = -1;

/// Fused per-segment features. Vectors are unit length whenever their
/// counter is positive and zero otherwise.
template <typename Scalar>
struct SegmentRecord {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  int label = kUnlabeled;
  Vector f_geo;
  Vector f_cnn;
  Scalar entropy = 0;
  std::uint64_t geo_count = 0;  // Omega
  std::uint64_t cnn_count = 0;  // Gamma
  std::uint64_t surfel_count = 0;

  SegmentRecord() = default;
  SegmentRecord(int l, int geo_dim, int cnn_dim)
      : label(l), f_geo(Vector::Zero(geo_dim)), f_cnn(Vector::Zero(cnn_dim)) {}
};

namespace detail {

/// Normalises `blend` into `f`, leaving `f` untouched for a zero blend.
template <typename Scalar, typename Derived>
void assign_normalized(Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f,
                       const Eigen::MatrixBase<Derived>& blend) {
  const Scalar n = blend.norm();
  if (n > Scalar(0) && std::isfinite(static_cast<double>(n))) f = blend / n;
}

}  // namespace detail

/// f <- normalize((Omega f + F) / (Omega + 1)), Omega <- Omega + 1.
template <typename Scalar, typename Derived>
void update_geo(SegmentRecord<Scalar>& rec, const Eigen::MatrixBase<Derived>& observed) {
  if (observed.size() != rec.f_geo.size()) throw std::invalid_argument("update_geo: dimension mismatch");
  if (!observed.allFinite()) throw std::invalid_argument("update_geo: non-finite descriptor");
  const Scalar omega = static_cast<Scalar>(rec.geo_count);
  detail::assign_normalized(rec.f_geo, (omega * rec.f_geo + observed.template cast<Scalar>()) /
                                           (omega + Scalar(1)));
  ++rec.geo_count;
}

/// One pixel's contribution to the deep feature and the entropy. Both
/// averages share the counter Gamma, which advances once per pixel.
template <typename Scalar, typename Derived>
void observe_pixel(SegmentRecord<Scalar>& rec, const Eigen::MatrixBase<Derived>& feature,
                   Scalar pixel_entropy) {
  const Scalar gamma = static_cast<Scalar>(rec.cnn_count);
  const Scalar denom = gamma + Scalar(1);
  detail::assign_normalized(rec.f_cnn,
                            (gamma * rec.f_cnn + feature.template cast<Scalar>()) / denom);
  rec.entropy = (gamma * rec.entropy + pixel_entropy) / denom;
  ++rec.cnn_count;
}

/// Counter-weighted union of two records; a channel with both counters zero
/// stays unset. The label of `a` is kept.
template <typename Scalar>
SegmentRecord<Scalar> merge_records(const SegmentRecord<Scalar>& a, const SegmentRecord<Scalar>& b) {
  SegmentRecord<Scalar> m = a;
  const auto oa = static_cast<Scalar>(a.geo_count), ob = static_cast<Scalar>(b.geo_count);
  if (a.geo_count + b.geo_count > 0) {
    m.f_geo.setZero();
    detail::assign_normalized(m.f_geo, oa * a.f_geo + ob * b.f_geo);
  }
  m.geo_count = a.geo_count + b.geo_count;

  const auto ga = static_cast<Scalar>(a.cnn_count), gb = static_cast<Scalar>(b.cnn_count);
  if (a.cnn_count + b.cnn_count > 0) {
    m.f_cnn.setZero();
    detail::assign_normalized(m.f_cnn, ga * a.f_cnn + gb * b.f_cnn);
    m.entropy = (ga * a.entropy + gb * b.entropy) / (ga + gb);
  }
  m.cnn_count = a.cnn_count + b.cnn_count;
  m.surfel_count = a.surfel_count + b.surfel_count;
  return m;
}

/// Entropy weight w = e / log N in [0, 1]. A segment never observed by the
/// network (Gamma = 0) relies on geometry only.
template <typename Scalar>
Scalar segment_weight(const SegmentRecord<Scalar>& rec, int class_count) {
  if (class_count < 2) throw std::invalid_argument("segment_weight: need at least two classes");
  if (rec.cnn_count == 0) return Scalar(1);
  return std::clamp(rec.entropy / static_cast<Scalar>(std::log(class_count)), Scalar(0), Scalar(1));
}

/// Entropy-weighted distance between two segments. A segment without a
/// geometric observation sits at distance sqrt(2) from everything in the
/// geometric term, scaled by the smaller weight.
template <typename Scalar>
Scalar segment_distance(const SegmentRecord<Scalar>& a, const SegmentRecord<Scalar>& b,
                        int class_count) {
  const Scalar wa = segment_weight(a, class_count);
  const Scalar wb = segment_weight(b, class_count);
  const Scalar deep = ((Scalar(1) - wa) * a.f_cnn - (Scalar(1) - wb) * b.f_cnn).norm();
  const Scalar geo = (a.geo_count == 0 || b.geo_count == 0)
                         ? static_cast<Scalar>(std::sqrt(2.0)) * std::min(wa, wb)
                         : (wa * a.f_geo - wb * b.f_geo).norm();
  return deep + geo;
}

/// s = exp(-eta d).
template <typename Scalar>
Scalar pairwise_similarity(const SegmentRecord<Scalar>& a, const SegmentRecord<Scalar>& b,
                           int class_count, Scalar eta) {
  return std::exp(-eta * segment_distance(a, b, class_count));
}

/// Byte counts of the feature store. The segment store holds one record per
/// map segment; the element baseline holds the same payload per surfel.
struct MemoryFootprint {
  std::uint64_t segment_count = 0;
  std::uint64_t element_count = 0;
  std::uint64_t segment_bytes = 0;
  std::uint64_t element_bytes = 0;

  double ratio() const {
    return segment_bytes == 0 ? 0.0 : static_cast<double>(element_bytes) / segment_bytes;
  }
};

/// The map-segment feature store, keyed by label in ascending order.
class SegmentTable {
 public:
  using Record = SegmentRecord<float>;

  explicit SegmentTable(int cnn_dim = kCnnDim, int class_count = 9);

  int cnn_dim() const { return cnn_dim_; }
  int class_count() const { return class_count_; }
  int next_label() const { return next_label_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Allocates a fresh empty record and returns its label.
  int create();
  bool contains(int label) const { return records_.count(label) > 0; }
  Record& at(int label);
  const Record& at(int label) const;
  void erase(int label) { records_.erase(label); }

  /// Folds `loser` into `winner` and removes it.
  void merge(int winner, int loser);

  const std::map<int, Record>& records() const { return records_; }
  std::vector<int> labels() const;

  /// Scalars held per record: S + G + 1.
  std::uint64_t scalars_per_record() const { return static_cast<std::uint64_t>(cnn_dim_) + kGeoDim + 1; }
  /// Label and the three counters.
  static constexpr std::uint64_t kCounterBytes = 4 + 3 * 8;
  MemoryFootprint footprint(std::uint64_t surfel_count) const;

  /// CSV: label, Omega, Gamma, e, surfels, 75 geometric then S deep values.
  void write_csv(std::ostream& os) const;
  void save(const std::filesystem::path& path) const;
  static SegmentTable load(const std::filesystem::path& path);

 private:
  int cnn_dim_;
  int class_count_;
  int next_label_ = 0;
  std::map<int, Record> records_;
};

}  // namespace opendisc
