#include "opendisc/pipeline.hpp"

#include <map>
#include <numeric>

#include "opendisc/descriptor.hpp"

namespace opendisc {

namespace {

constexpr std::array<std::string_view, kStageCount> kStageNames = {
    "Building 3D segmentation map", "Deep feature extraction", "Geometric feature extraction",
    "Entropy computation",          "Feature/Entropy update",  "3D segment clustering",
};

template <typename F>
decltype(auto) run_stage(StageProfiler& profiler, int frame, Stage s, F&& f) {
  try {
    return timed(profiler, s, std::forward<F>(f));
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(frame, s, e.what());
  }
}

std::string describe(int frame, Stage stage, const std::string& what) {
  return "frame " + std::to_string(frame) + ", stage '" + std::string(stage_name(stage)) + "': " + what;
}

}  // namespace

std::string_view stage_name(Stage s) { return kStageNames.at(static_cast<std::size_t>(s)); }

void StageProfiler::add(Stage s, double ms) {
  if (frames_.empty()) begin_frame();
  frames_.back()[static_cast<std::size_t>(s)] += ms;
}

double StageProfiler::mean_ms(Stage s) const {
  if (frames_.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& f : frames_) sum += f[static_cast<std::size_t>(s)];
  return sum / static_cast<double>(frames_.size());
}

double StageProfiler::mean_total_ms() const {
  double sum = 0.0;
  for (int s = 0; s < kStageCount; ++s) sum += mean_ms(static_cast<Stage>(s));
  return sum;
}

void PipelineConfig::validate() const {
  smoothing.validate();
  slic.validate();
  merge.validate();
  fusion.validate();
  mcl.validate();
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(min_overlap > 0.0 && min_overlap <= 1.0)) throw std::invalid_argument("min_overlap must lie in (0, 1]");
  if (min_segment_pixels < 0) throw std::invalid_argument("min_segment_pixels must not be negative");
  if (recluster_every < 1) throw std::invalid_argument("recluster_every must be at least 1");
  if (class_count < 2) throw std::invalid_argument("class_count must be at least 2");
}

PipelineError::PipelineError(int frame, Stage stage, const std::string& what)
    : std::runtime_error(describe(frame, stage, what)), frame_(frame), stage_(stage) {}

Pipeline::Pipeline(const PipelineConfig& config) : config_(config) { config_.validate(); }

const FrameStats& Pipeline::process(const Frame& frame, const FeaturePacket* packet) {
  const int t = frame.timestamp;
  if (profiler_.frames().size() <= history_.size()) profiler_.begin_frame();

  if (packet) {
    run_stage(profiler_, t, Stage::kDeepFeatures, [&] {
      if (packet->width != frame.width() || packet->height != frame.height()) {
        throw std::invalid_argument("feature packet resolution differs from the frame");
      }
      if (packet->class_count < 2) throw std::invalid_argument("feature packet needs at least two classes");
      if (table_ready_ && (packet->feature_dim != table_.cnn_dim() || packet->class_count != table_.class_count())) {
        throw std::invalid_argument("feature packet dimensions changed between frames");
      }
    });
  }
  if (!table_ready_) {
    table_ = packet ? SegmentTable(packet->feature_dim, packet->class_count)
                    : SegmentTable(kCnnDim, config_.class_count);
    table_ready_ = true;
  }

  FrameStats stats;
  stats.frame = t;

  // Segment, fuse, carry labels over from the map, then render the updated
  // map so every later stage reads labels from R.
  const Image<int> rendered = run_stage(profiler_, t, Stage::kMapBuilding, [&] {
    const FrameSegmentation seg = segment_frame(frame, config_.slic, config_.merge);
    stats.frame_segments = static_cast<int>(seg.segments.size());
    const FusionResult fusion = map_.fuse(frame, config_.fusion);
    RenderedSegmentMap before = map_.render_labels(frame.pose, frame.intrinsics);
    discard_off_surface(before, frame.depth);
    LabelCorrespondence corr = propagate_labels(before, seg, config_.min_overlap, config_.min_segment_pixels);
    stats.merges = relabel_surfels(map_, table_, corr, seg, fusion);
    RenderedSegmentMap after = map_.render_labels(frame.pose, frame.intrinsics);
    discard_off_surface(after, frame.depth);
    return std::move(after.labels);
  });

  using Descriptor = Eigen::VectorXd;
  const std::map<int, Descriptor> descriptors = run_stage(profiler_, t, Stage::kGeometricFeatures, [&] {
    std::map<int, std::vector<Eigen::Vector3d>> vertices;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
      const int l = rendered[i];
      if (l < 0 || !is_valid(frame.vertex_map[i])) continue;
      vertices[l].push_back(to_world_point(frame.pose, frame.vertex_map[i].cast<double>()));
    }
    std::map<int, Descriptor> out;
    for (const auto& [l, pts] : vertices) {
      if (static_cast<int>(pts.size()) < kMinLrfPoints || !table_.contains(l)) continue;
      Points3<double> cloud(3, static_cast<Eigen::Index>(pts.size()));
      for (std::size_t k = 0; k < pts.size(); ++k) cloud.col(static_cast<Eigen::Index>(k)) = pts[k];
      try {
        out.emplace(l, good_descriptor(cloud, estimate_lrf(cloud)));
      } catch (const DegenerateGeometry&) {
        // collinear or coincident points carry no shape information
      }
    }
    return out;
  });

  std::optional<Image<float>> entropy;
  if (packet) {
    entropy = run_stage(profiler_, t, Stage::kEntropy, [&] { return compute_entropy(*packet); });
  }

  run_stage(profiler_, t, Stage::kFeatureUpdate, [&] {
    for (const auto& [l, d] : descriptors) update_geo(table_.at(l), d.cast<float>());
    if (!packet) return;
    SegmentTable::Record* rec = nullptr;
    int rec_label = kUnlabeled;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
      const int l = rendered[i];
      if (l < 0) continue;
      if (l != rec_label) {
        rec = table_.contains(l) ? &table_.at(l) : nullptr;
        rec_label = l;
      }
      if (rec) observe_pixel(*rec, packet->feature(i), (*entropy)[i]);
    }
  });

  clusters_current_ = false;
  if ((frames_processed() + 1) % config_.recluster_every == 0) recluster(t);

  stats.surfels = map_.size();
  stats.map_segments = table_.size();
  stats.clusters = clusters_.cluster_count;
  stats.memory = table_.footprint(map_.size());
  history_.push_back(stats);
  return history_.back();
}

void Pipeline::recluster(int frame) {
  run_stage(profiler_, frame, Stage::kClustering,
            [&] { clusters_ = opendisc::recluster(table_, config_.eta, config_.mcl, &graph_); });
  clusters_current_ = true;
}

void Pipeline::finish() {
  if (clusters_current_ || history_.empty()) return;
  recluster(history_.back().frame);
  history_.back().clusters = clusters_.cluster_count;
}

Pipeline run_sequence(const PipelineConfig& config, const Sequence& sequence,
                      const std::function<void(const FrameStats&)>& progress) {
  Pipeline pipeline(config);
  for (int t = 0; t < sequence.frame_count(); ++t) {
    StageProfiler& profiler = pipeline.profiler();
    profiler.begin_frame();
    const Frame frame = run_stage(profiler, t, Stage::kMapBuilding, [&] { return sequence.load_frame(t, config.smoothing); });
    const std::optional<FeaturePacket> packet = run_stage(
        profiler, t, Stage::kDeepFeatures, [&] { return load_frame_packet(sequence.dir, t, config.features); });
    const FrameStats& stats = pipeline.process(frame, packet ? &*packet : nullptr);
    if (progress) progress(stats);
  }
  pipeline.finish();
  return pipeline;
}

}  // namespace opendisc
