#pragma once

#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "opendisc/clustering.hpp"
#include "opendisc/feature_packet.hpp"
#include "opendisc/io.hpp"
#include "opendisc/segment_table.hpp"
#include "opendisc/segmentation.hpp"
#include "opendisc/surfel_map.hpp"

namespace opendisc {

enum class Stage {
  kMapBuilding,
  kDeepFeatures,
  kGeometricFeatures,
  kEntropy,
  kFeatureUpdate,
  kClustering,
};
inline constexpr int kStageCount = 6;

/// Display name of a stage, e.g. "3D segment clustering".
std::string_view stage_name(Stage s);

/// Wall-clock milliseconds per stage and frame.
class StageProfiler {
 public:
  using FrameTimes = std::array<double, kStageCount>;

  void begin_frame() { frames_.emplace_back().fill(0.0); }
  void add(Stage s, double ms);
  const std::vector<FrameTimes>& frames() const { return frames_; }
  double mean_ms(Stage s) const;
  double mean_total_ms() const;

 private:
  std::vector<FrameTimes> frames_;
};

struct PipelineConfig {
  NormalSmoothing smoothing{.radius = 3};
  SlicParams slic;
  MergeThresholds merge;
  FusionParams fusion;
  MclParams mcl;
  double eta = 6.0;
  double min_overlap = 0.3;  // label propagation
  int min_segment_pixels = 64;  // smaller unmatched frame segments open no map segment
  FeatureMode features = FeatureMode::kRequired;
  int recluster_every = 1;
  int class_count = 9;  // probability depth assumed when no packet is ever seen

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Failure inside the per-frame loop, tagged with the frame and stage.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(int frame, Stage stage, const std::string& what);
  int frame() const { return frame_; }
  Stage stage() const { return stage_; }

 private:
  int frame_;
  Stage stage_;
};

struct FrameStats {
  int frame = 0;
  int frame_segments = 0;
  int merges = 0;
  std::size_t surfels = 0;
  std::size_t map_segments = 0;
  int clusters = 0;
  MemoryFootprint memory;
};

/// Incremental segmentation, fusion, feature aggregation and clustering.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& config);

  /// Runs one frame. `packet`, when given, must match the frame resolution
  /// and keep the same dimensions across frames.
  const FrameStats& process(const Frame& frame, const FeaturePacket* packet);

  /// Reclusters if the last processed frame was skipped by recluster_every.
  void finish();

  const PipelineConfig& config() const { return config_; }
  const SurfelMap& map() const { return map_; }
  const SegmentTable& table() const { return table_; }
  const ClusterMap& clusters() const { return clusters_; }
  const SegmentGraph& graph() const { return graph_; }
  const std::vector<FrameStats>& history() const { return history_; }
  StageProfiler& profiler() { return profiler_; }
  const StageProfiler& profiler() const { return profiler_; }
  int frames_processed() const { return static_cast<int>(history_.size()); }

 private:
  void recluster(int frame);

  PipelineConfig config_;
  SurfelMap map_;
  SegmentTable table_;
  bool table_ready_ = false;
  ClusterMap clusters_;
  SegmentGraph graph_;
  bool clusters_current_ = true;
  StageProfiler profiler_;
  std::vector<FrameStats> history_;
};

/// Loads and processes every frame of a sequence, then finishes. Packet
/// loading counts toward the deep feature stage and frame loading toward map
/// building. `progress` is called after each frame.
Pipeline run_sequence(const PipelineConfig& config, const Sequence& sequence,
                      const std::function<void(const FrameStats&)>& progress = {});

/// Times a callable into a profiler slot.
template <typename F>
decltype(auto) timed(StageProfiler& profiler, Stage s, F&& f) {
  struct Guard {
    StageProfiler& p;
    Stage s;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    ~Guard() {
      p.add(s, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
  } guard{profiler, s};
  return f();
}

}  // namespace opendisc
