#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "opendisc/clustering.hpp"
#include "opendisc/image.hpp"
#include "opendisc/io.hpp"
#include "opendisc/surfel_map.hpp"

namespace opendisc {

/// Predicted id marking pixels without a prediction or mapped to no class.
inline constexpr int kVoidPrediction = -1;

/// Pixel co-occurrence of predicted ids and ground-truth classes. Ground
/// truth pixels equal to kVoidClass are not evaluated.
class Contingency {
 public:
  void add(const Image<int>& predicted, const Image<std::uint8_t>& truth);

  /// Each predicted id goes to the class holding most of its evaluated
  /// pixels (ties go to the smaller class id). Ids seen only on void ground
  /// truth are absent from the result.
  std::map<int, int> plurality() const;

  const std::map<int, std::map<int, std::uint64_t>>& counts() const { return counts_; }

 private:
  std::map<int, std::map<int, std::uint64_t>> counts_;  // predicted id -> class -> pixels
};

/// Replaces every predicted id by its class, kVoidPrediction when unmapped.
Image<int> apply_mapping(const Image<int>& predicted, const std::map<int, int>& mapping);

/// Intersection and union pixel counts per class, accumulated over frames.
class IouAccumulator {
 public:
  explicit IouAccumulator(int class_count);

  /// `mapped` holds class ids or kVoidPrediction.
  void add(const Image<int>& mapped, const Image<std::uint8_t>& truth);

  int class_count() const { return static_cast<int>(intersection_.size()); }
  /// nullopt when the class appears in neither prediction nor truth.
  std::optional<double> iou(int c) const;
  std::vector<std::optional<double>> ious() const;

 private:
  std::vector<std::uint64_t> intersection_;
  std::vector<std::uint64_t> union_;
};

/// IoU of class c in a single image pair.
std::optional<double> compute_iou(const Image<int>& mapped, const Image<std::uint8_t>& truth, int c);

/// Mean over the classes that have a value; 0 when none does.
double mean_iou(const std::vector<std::optional<double>>& ious);

/// Z-buffered render of cluster ids; segments without a cluster render void.
Image<int> render_prediction(const SurfelMap& map, const ClusterMap& clusters, const Pose& pose,
                             const Intrinsics& intr);

/// Ground truth provider: class image of frame t.
using TruthSource = std::function<Image<std::uint8_t>(int t)>;

struct EvalOptions {
  /// Average per-frame IoU instead of pooling pixel counts over all frames.
  bool per_frame_average = false;
};

struct EvalReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> iou;  // per class
  double mean_iou = 0.0;
  int evaluated_classes = 0;
  std::map<int, int> cluster_to_class;  // clusters on void ground truth only are omitted
  int frames = 0;
  bool per_frame_average = false;
};

/// Renders the clustered map at every pose, maps clusters to classes by
/// plurality over all frames, then scores IoU per class.
EvalReport evaluate_clusters(const SurfelMap& map, const ClusterMap& clusters, const Intrinsics& intr,
                             const std::vector<Pose>& poses, const TruthSource& truth,
                             const ClassList& classes, const EvalOptions& options = {});

/// Majority ground-truth class of every map segment, from renders of the
/// segment labels at every pose.
std::map<int, int> segment_majority_class(const SurfelMap& map, const Intrinsics& intr,
                                          const std::vector<Pose>& poses, const TruthSource& truth);

/// Ground truth read from a sequence's labels/ directory.
TruthSource sequence_truth(const Sequence& sequence);

}  // namespace opendisc
