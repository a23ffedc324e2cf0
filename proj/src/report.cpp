#include "opendisc/report.hpp"

#include <algorithm>

namespace opendisc {

using nlohmann::json;

json to_json(const PipelineConfig& c) {
  return {
      {"smoothing", {{"radius", c.smoothing.radius},
                     {"sigma_space", c.smoothing.sigma_space},
                     {"sigma_range_k", c.smoothing.sigma_range_k}}},
      {"slic", {{"target_superpixels", c.slic.target_superpixels},
                {"alpha", c.slic.alpha},
                {"beta", c.slic.beta},
                {"iterations", c.slic.iterations}}},
      {"merge", {{"sigma_lambda", c.merge.sigma_lambda},
                 {"sigma_phi", c.merge.sigma_phi},
                 {"noise_k", c.merge.noise_k}}},
      {"fusion", {{"depth_gate_k", c.fusion.depth_gate_k},
                  {"normal_gate_degrees", c.fusion.normal_gate_degrees}}},
      {"mcl", {{"inflation", c.mcl.inflation},
               {"prune", c.mcl.prune},
               {"max_iters", c.mcl.max_iters},
               {"tolerance", c.mcl.tolerance},
               {"attractor_threshold", c.mcl.attractor_threshold}}},
      {"eta", c.eta},
      {"min_overlap", c.min_overlap},
      {"min_segment_pixels", c.min_segment_pixels},
      {"features", to_string(c.features)},
      {"recluster_every", c.recluster_every},
      {"class_count", c.class_count},
  };
}

json to_json(const EvalReport& r, const ClassList& classes) {
  json per_class = json::array();
  std::vector<std::optional<double>> trained, novel;
  for (std::size_t c = 0; c < r.iou.size(); ++c) {
    const bool is_trained = c < classes.trained.size() && classes.trained[c];
    per_class.push_back({{"name", r.class_names.at(c)},
                         {"trained", is_trained},
                         {"iou", r.iou[c] ? json(*r.iou[c]) : json(nullptr)}});
    (is_trained ? trained : novel).push_back(r.iou[c]);
  }
  json mapping = json::array();
  for (const auto& [cluster, cls] : r.cluster_to_class) mapping.push_back({{"cluster", cluster}, {"class", cls}});
  return {
      {"protocol", r.per_frame_average ? "plurality, per-frame average" : "plurality, pooled over frames"},
      {"frames", r.frames},
      {"classes", per_class},
      {"mean_iou", r.mean_iou},
      {"mean_iou_trained", mean_iou(trained)},
      {"mean_iou_novel", mean_iou(novel)},
      {"evaluated_classes", r.evaluated_classes},
      {"cluster_to_class", mapping},
  };
}

json run_report(const Pipeline& pipeline, const std::optional<json>& evaluation) {
  json frames = json::array();
  std::uint64_t peak_segment = 0, peak_element = 0;
  for (const FrameStats& s : pipeline.history()) {
    frames.push_back({{"frame", s.frame},
                      {"frame_segments", s.frame_segments},
                      {"merges", s.merges},
                      {"surfels", s.surfels},
                      {"map_segments", s.map_segments},
                      {"clusters", s.clusters},
                      {"segment_bytes", s.memory.segment_bytes},
                      {"element_bytes", s.memory.element_bytes}});
    peak_segment = std::max(peak_segment, s.memory.segment_bytes);
    peak_element = std::max(peak_element, s.memory.element_bytes);
  }
  const MemoryFootprint final_memory = pipeline.table().footprint(pipeline.map().size());
  json stages = json::array();
  for (int s = 0; s < kStageCount; ++s) stages.push_back(stage_name(static_cast<Stage>(s)));

  return {
      {"config", to_json(pipeline.config())},
      {"frames", pipeline.frames_processed()},
      {"map", {{"surfels", pipeline.map().size()},
               {"segments", pipeline.table().size()},
               {"clusters", pipeline.clusters().cluster_count},
               {"mcl_iterations", pipeline.clusters().iterations}}},
      {"memory", {{"segment_bytes", final_memory.segment_bytes},
                  {"element_bytes", final_memory.element_bytes},
                  {"element_to_segment_ratio", final_memory.ratio()},
                  {"peak_segment_bytes", peak_segment},
                  {"peak_element_bytes", peak_element},
                  {"per_frame", frames}}},
      {"timing", {{"stages", stages}, {"file", "timing.json"}}},
      {"evaluation", evaluation ? *evaluation : json(nullptr)},
  };
}

json timing_report(const StageProfiler& profiler) {
  json stages = json::array();
  for (int s = 0; s < kStageCount; ++s) {
    stages.push_back({{"name", stage_name(static_cast<Stage>(s))}, {"mean_ms", profiler.mean_ms(static_cast<Stage>(s))}});
  }
  json per_frame = json::array();
  for (const auto& f : profiler.frames()) per_frame.push_back(f);
  return {{"frames", profiler.frames().size()},
          {"stages", stages},
          {"mean_total_ms", profiler.mean_total_ms()},
          {"per_frame_ms", per_frame}};
}

}  // namespace opendisc
