#include "opendisc/evaluation.hpp"

#include <stdexcept>
#include <string>

namespace opendisc {

namespace {

void require_same_shape(const Image<int>& a, const Image<std::uint8_t>& b, const char* who) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(who) + ": prediction and ground truth differ in size");
  }
}

}  // namespace

void Contingency::add(const Image<int>& predicted, const Image<std::uint8_t>& truth) {
  require_same_shape(predicted, truth, "Contingency::add");
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (truth[i] == kVoidClass) continue;
    ++counts_[predicted[i]][truth[i]];
  }
}

std::map<int, int> Contingency::plurality() const {
  std::map<int, int> out;
  for (const auto& [id, row] : counts_) {
    if (id == kVoidPrediction) continue;
    int best = -1;
    std::uint64_t best_n = 0;
    for (const auto& [c, n] : row) {
      if (n > best_n) {
        best = c;
        best_n = n;
      }
    }
    if (best >= 0) out[id] = best;
  }
  return out;
}

Image<int> apply_mapping(const Image<int>& predicted, const std::map<int, int>& mapping) {
  Image<int> out(predicted.width(), predicted.height(), kVoidPrediction);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const auto it = mapping.find(predicted[i]);
    if (it != mapping.end()) out[i] = it->second;
  }
  return out;
}

IouAccumulator::IouAccumulator(int class_count) {
  if (class_count <= 0 || class_count >= kVoidClass) {
    throw std::invalid_argument("IouAccumulator: class count must lie in [1, 254]");
  }
  intersection_.assign(class_count, 0);
  union_.assign(class_count, 0);
}

void IouAccumulator::add(const Image<int>& mapped, const Image<std::uint8_t>& truth) {
  require_same_shape(mapped, truth, "IouAccumulator::add");
  const int n = class_count();
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    const int g = truth[i];
    if (g == kVoidClass) continue;
    if (g >= n) throw std::out_of_range("ground truth class " + std::to_string(g) + " outside the class list");
    const int p = mapped[i];
    if (p >= n) throw std::out_of_range("predicted class " + std::to_string(p) + " outside the class list");
    ++union_[g];
    if (p == g) ++intersection_[g];
    else if (p >= 0) ++union_[p];
  }
}

std::optional<double> IouAccumulator::iou(int c) const {
  if (union_.at(c) == 0) return std::nullopt;
  return static_cast<double>(intersection_[c]) / static_cast<double>(union_[c]);
}

std::vector<std::optional<double>> IouAccumulator::ious() const {
  std::vector<std::optional<double>> out(class_count());
  for (int c = 0; c < class_count(); ++c) out[c] = iou(c);
  return out;
}

std::optional<double> compute_iou(const Image<int>& mapped, const Image<std::uint8_t>& truth, int c) {
  require_same_shape(mapped, truth, "compute_iou");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    if (truth[i] == kVoidClass) continue;
    const bool p = mapped[i] == c, g = truth[i] == c;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return std::nullopt;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mean_iou(const std::vector<std::optional<double>>& ious) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : ious) {
    if (!v) continue;
    sum += *v;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

Image<int> render_prediction(const SurfelMap& map, const ClusterMap& clusters, const Pose& pose,
                             const Intrinsics& intr) {
  return map.render(pose, intr, [&](const Surfel& s) { return clusters.at(s.label); }).labels;
}

EvalReport evaluate_clusters(const SurfelMap& map, const ClusterMap& clusters, const Intrinsics& intr,
                             const std::vector<Pose>& poses, const TruthSource& truth,
                             const ClassList& classes, const EvalOptions& options) {
  std::vector<Image<int>> predictions;
  std::vector<Image<std::uint8_t>> truths;
  predictions.reserve(poses.size());
  truths.reserve(poses.size());
  Contingency table;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    predictions.push_back(render_prediction(map, clusters, poses[t], intr));
    truths.push_back(truth(static_cast<int>(t)));
    table.add(predictions.back(), truths.back());
  }

  EvalReport report;
  report.class_names = classes.names;
  report.cluster_to_class = table.plurality();
  report.frames = static_cast<int>(poses.size());
  report.per_frame_average = options.per_frame_average;

  const int n = classes.size();
  IouAccumulator pooled(n);
  std::vector<double> frame_sum(n, 0.0);
  std::vector<int> frame_count(n, 0);
  for (std::size_t t = 0; t < poses.size(); ++t) {
    const Image<int> mapped = apply_mapping(predictions[t], report.cluster_to_class);
    pooled.add(mapped, truths[t]);
    if (!options.per_frame_average) continue;
    IouAccumulator frame(n);
    frame.add(mapped, truths[t]);
    for (int c = 0; c < n; ++c) {
      if (const auto v = frame.iou(c)) {
        frame_sum[c] += *v;
        ++frame_count[c];
      }
    }
  }

  if (options.per_frame_average) {
    report.iou.assign(n, std::nullopt);
    for (int c = 0; c < n; ++c) {
      if (frame_count[c] > 0) report.iou[c] = frame_sum[c] / frame_count[c];
    }
  } else {
    report.iou = pooled.ious();
  }
  report.mean_iou = mean_iou(report.iou);
  for (const auto& v : report.iou) report.evaluated_classes += v.has_value();
  return report;
}

std::map<int, int> segment_majority_class(const SurfelMap& map, const Intrinsics& intr,
                                          const std::vector<Pose>& poses, const TruthSource& truth) {
  Contingency table;
  for (std::size_t t = 0; t < poses.size(); ++t) {
    table.add(map.render_labels(poses[t], intr).labels, truth(static_cast<int>(t)));
  }
  return table.plurality();
}

TruthSource sequence_truth(const Sequence& sequence) {
  return [sequence](int t) { return read_png_gray8(sequence.label_path(t)); };
}

}  // namespace opendisc
