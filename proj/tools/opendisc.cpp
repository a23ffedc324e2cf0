// Command-line front end: synth, run, evaluate and export-ply.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "opendisc/evaluation.hpp"
#include "opendisc/pipeline.hpp"
#include "opendisc/report.hpp"
#include "opendisc/synthetic.hpp"

namespace fs = std::filesystem;
using namespace opendisc;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_json(const fs::path& path, const json& j) { open_out(path) << j.dump(2) << '\n'; }

ClusterMap load_clusters(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_clusters_csv(is);
}

std::function<int(const Surfel&)> colouring(const std::string& mode, const ClusterMap& clusters) {
  if (mode == "clusters") return [&clusters](const Surfel& s) { return clusters.at(s.label); };
  return [](const Surfel& s) { return static_cast<int>(s.label); };
}

std::optional<json> evaluate_run(const SurfelMap& map, const ClusterMap& clusters, const Sequence& seq,
                                 bool per_frame) {
  if (!seq.has_labels() || !fs::exists(seq.dir / "classes.txt")) return std::nullopt;
  const ClassList classes = read_classes(seq.dir / "classes.txt");
  const EvalReport report = evaluate_clusters(map, clusters, seq.intrinsics, seq.poses, sequence_truth(seq),
                                              classes, {.per_frame_average = per_frame});
  return to_json(report, classes);
}

struct RunOptions {
  std::string sequence;
  std::string out = "out";
  std::string features = "required";
  std::string color = "clusters";
  bool dump_graph = false;
  bool per_frame_iou = false;
  bool quiet = false;
};

void add_config_flags(CLI::App& cmd, PipelineConfig& c, RunOptions& o) {
  cmd.add_option("--smooth-radius", c.smoothing.radius, "Bilateral radius for normal estimation, 0 disables")
      ->capture_default_str();
  cmd.add_option("--superpixels", c.slic.target_superpixels, "Target SLIC superpixel count")->capture_default_str();
  cmd.add_option("--alpha", c.slic.alpha, "SLIC normal weight")->capture_default_str();
  cmd.add_option("--beta", c.slic.beta, "SLIC image-distance weight")->capture_default_str();
  cmd.add_option("--slic-iterations", c.slic.iterations, "SLIC iterations")->capture_default_str();
  cmd.add_option("--sigma-lambda", c.merge.sigma_lambda, "Colour merge threshold")->capture_default_str();
  cmd.add_option("--sigma-phi", c.merge.sigma_phi, "Convexity merge threshold")->capture_default_str();
  cmd.add_option("--noise-k", c.merge.noise_k, "Multiplier on the axial noise for the offset test")
      ->capture_default_str();
  cmd.add_option("--depth-gate", c.fusion.depth_gate_k, "Fusion depth gate in noise sigmas")->capture_default_str();
  cmd.add_option("--normal-gate", c.fusion.normal_gate_degrees, "Fusion normal gate in degrees")
      ->capture_default_str();
  cmd.add_option("--eta", c.eta, "Similarity sharpness")->capture_default_str();
  cmd.add_option("--inflation", c.mcl.inflation, "MCL inflation")->capture_default_str();
  cmd.add_option("--prune", c.mcl.prune, "MCL pruning threshold")->capture_default_str();
  cmd.add_option("--max-iters", c.mcl.max_iters, "MCL iteration cap")->capture_default_str();
  cmd.add_option("--min-overlap", c.min_overlap, "Label propagation overlap ratio")->capture_default_str();
  cmd.add_option("--min-segment-pixels", c.min_segment_pixels, "Smallest unmatched frame segment that opens a map segment")
      ->capture_default_str();
  cmd.add_option("--recluster-every", c.recluster_every, "Recluster every k frames")->capture_default_str();
  cmd.add_option("--classes", c.class_count, "Probability depth when no features are loaded")
      ->capture_default_str();
  cmd.add_option("--features", o.features, "Deep feature packets")
      ->check(CLI::IsMember({"required", "optional", "off"}))
      ->capture_default_str();
}

int cmd_run(PipelineConfig config, const RunOptions& o) {
  config.features = parse_feature_mode(o.features);
  config.validate();
  const Sequence seq = Sequence::open(o.sequence);
  const fs::path out = o.out;
  fs::create_directories(out);

  const Pipeline pipeline = run_sequence(config, seq, [&](const FrameStats& s) {
    if (!o.quiet) {
      std::cerr << "frame " << s.frame << ": " << s.frame_segments << " frame segments, " << s.map_segments
                << " map segments, " << s.surfels << " surfels, " << s.clusters << " clusters\n";
    }
  });

  const auto evaluation = evaluate_run(pipeline.map(), pipeline.clusters(), seq, o.per_frame_iou);
  write_json(out / "report.json", run_report(pipeline, evaluation));
  write_json(out / "timing.json", timing_report(pipeline.profiler()));
  pipeline.map().save(out / "map.bin");
  pipeline.table().save(out / "segments.bin");
  {
    auto os = open_out(out / "segments.csv");
    pipeline.table().write_csv(os);
  }
  {
    auto os = open_out(out / "clusters.csv");
    write_clusters_csv(os, pipeline.clusters());
  }
  if (o.dump_graph) {
    auto os = open_out(out / "graph.csv");
    write_graph_csv(os, pipeline.graph());
  }
  {
    auto os = open_out(out / "map.ply", std::ios::out | std::ios::binary);
    write_ply(os, pipeline.map(), colouring(o.color, pipeline.clusters()));
  }

  std::cout << "segments " << pipeline.table().size() << ", clusters " << pipeline.clusters().cluster_count
            << ", surfels " << pipeline.map().size();
  if (evaluation) std::cout << ", mean IoU " << (*evaluation)["mean_iou"].get<double>();
  std::cout << ", " << pipeline.profiler().mean_total_ms() << " ms/frame\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental RGBD segmentation and open-world class discovery"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic sequence directory");
  std::string synth_out, scene_file;
  int frames = 60;
  bool noise = false;
  std::optional<std::uint64_t> seed;
  synth->add_option("out", synth_out, "Output sequence directory")->required();
  synth->add_option("--scene", scene_file, "Scene description file (default: the reference room)");
  synth->add_option("--frames", frames, "Frames along the reference orbit")->capture_default_str();
  synth->add_flag("--noise", noise, "Add axial depth noise");
  synth->add_option("--seed", seed, "Override the scene seed");

  // run
  auto* run = app.add_subcommand("run", "Process a sequence and export the map, clusters and reports");
  PipelineConfig config;
  RunOptions run_opts;
  run->add_option("sequence", run_opts.sequence, "Sequence directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("-o,--out", run_opts.out, "Output directory")->capture_default_str();
  add_config_flags(*run, config, run_opts);
  run->add_flag("--dump-graph", run_opts.dump_graph, "Write the final similarity graph to graph.csv");
  run->add_option("--color", run_opts.color, "PLY colouring")
      ->check(CLI::IsMember({"segments", "clusters"}))
      ->capture_default_str();
  run->add_flag("--per-frame-iou", run_opts.per_frame_iou, "Average IoU per frame instead of pooling");
  run->add_flag("-q,--quiet", run_opts.quiet, "No per-frame progress");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a finished run against ground-truth labels");
  std::string eval_seq, eval_run;
  bool eval_per_frame = false;
  evaluate->add_option("sequence", eval_seq, "Sequence directory with labels/ and classes.txt")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("run", eval_run, "Output directory of a previous run")->required()->check(CLI::ExistingDirectory);
  evaluate->add_flag("--per-frame-iou", eval_per_frame, "Average IoU per frame instead of pooling");

  // export-ply
  auto* ply = app.add_subcommand("export-ply", "Write a coloured PLY of a finished run");
  std::string ply_run, ply_out, ply_color = "clusters";
  ply->add_option("run", ply_run, "Output directory of a previous run")->required()->check(CLI::ExistingDirectory);
  ply->add_option("out", ply_out, "PLY file")->required();
  ply->add_option("--color", ply_color, "Colouring")
      ->check(CLI::IsMember({"segments", "clusters"}))
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SceneSpec spec = scene_file.empty() ? default_room(frames, noise) : read_scene(scene_file);
      if (!scene_file.empty() && noise) spec.depth_noise = true;
      if (seed) spec.seed = *seed;
      spec.validate();
      write_sequence(spec, synth_out);
      std::cout << "wrote " << spec.poses().size() << " frames to " << synth_out << '\n';
      return 0;
    }
    if (*run) return cmd_run(config, run_opts);
    if (*evaluate) {
      const Sequence seq = Sequence::open(eval_seq);
      const fs::path dir = eval_run;
      const SurfelMap map = SurfelMap::load(dir / "map.bin");
      const ClusterMap clusters = load_clusters(dir / "clusters.csv");
      const auto evaluation = evaluate_run(map, clusters, seq, eval_per_frame);
      if (!evaluation) throw std::runtime_error(eval_seq + ": needs labels/ and classes.txt");
      json report = json::object();
      if (std::ifstream is(dir / "report.json"); is) report = json::parse(is);
      report["evaluation"] = *evaluation;
      write_json(dir / "report.json", report);
      std::cout << "mean IoU " << (*evaluation)["mean_iou"].get<double>() << '\n';
      return 0;
    }
    if (*ply) {
      const fs::path dir = ply_run;
      const SurfelMap map = SurfelMap::load(dir / "map.bin");
      const ClusterMap clusters = ply_color == "clusters" ? load_clusters(dir / "clusters.csv") : ClusterMap{};
      auto os = open_out(ply_out, std::ios::out | std::ios::binary);
      write_ply(os, map, colouring(ply_color, clusters));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
