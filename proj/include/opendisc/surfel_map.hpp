#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "opendisc/frame.hpp"
#include "opendisc/segment_table.hpp"
#include "opendisc/segmentation.hpp"

namespace opendisc {

struct Surfel {
  Eigen::Vector3f position;  // world
  Eigen::Vector3f normal;    // world, unit, facing the camera that created it
  float radius = 0.0f;
  float confidence = 0.0f;
  std::int32_t label = kUnlabeled;
};

struct FusionParams {
  double depth_gate_k = 3.0;        // multiples of the axial noise sigma
  double normal_gate_degrees = 20.0;

  void validate() const;
};

/// Surfel index hit by each pixel of the current frame during fusion, -1
/// where the pixel contributed nothing (missing depth or normal).
struct FusionResult {
  Image<int> association;
  std::size_t updated = 0;
  std::size_t covered = 0;
  std::size_t inserted = 0;
};

/// Z-buffered render of some per-surfel id; -1 where nothing projects.
struct RenderedSegmentMap {
  Image<int> labels;
  Image<float> depth;  // camera z of the winning surfel, 0 where empty
};

class SurfelMap {
 public:
  std::size_t size() const { return surfels_.size(); }
  bool empty() const { return surfels_.empty(); }
  const std::vector<Surfel>& surfels() const { return surfels_; }
  std::vector<Surfel>& surfels() { return surfels_; }

  /// Projective association of each valid pixel. A surfel whose centre lands
  /// on the pixel and passes the depth and normal gates is averaged with the
  /// measurement (confidence-weighted); failing that, a gated surfel whose
  /// splat covers the pixel is recorded without update; otherwise a new
  /// surfel of radius depth / fx * sqrt(2) is inserted. Pixels need both a
  /// valid vertex and a valid normal.
  FusionResult fuse(const Frame& frame, const FusionParams& params = {});

  /// Renders `id(surfel)` with splats of the projected surfel radius (at
  /// least the centre pixel), nearest surfel winning.
  RenderedSegmentMap render(const Pose& pose, const Intrinsics& intr,
                            const std::function<int(const Surfel&)>& id) const;

  /// Renders the segment labels.
  RenderedSegmentMap render_labels(const Pose& pose, const Intrinsics& intr) const;

  /// Rewrites labels through `mapping` (indexed by old label); labels outside
  /// the mapping are left alone.
  void remap_labels(const std::vector<int>& mapping);

  /// Surfels per label, indexed by label (size = max label + 1).
  std::vector<std::uint64_t> label_histogram() const;

  void save(const std::filesystem::path& path) const;
  static SurfelMap load(const std::filesystem::path& path);

 private:
  std::vector<Surfel> surfels_;
};

/// Clears rendered ids whose splat depth does not lie on the observed
/// surface (see same_surface_depth), such as splats spilling past an
/// occlusion edge. Pixels without observed depth are cleared too. Returns the
/// number of pixels cleared.
std::size_t discard_off_surface(RenderedSegmentMap& rendered, const Image<float>& depth);

/// Outcome of matching one frame's segments against the rendered map.
struct LabelCorrespondence {
  static constexpr int kNew = -2;
  static constexpr int kSkip = -3;  // too small to open a segment; surfels keep their labels
  std::vector<int> label_of;    // per frame segment: map label, kNew or kSkip
  std::vector<double> overlap;  // best overlap ratio per frame segment
  std::vector<std::pair<int, int>> merges;  // (winner, loser) map labels
};

/// For every frame segment, the map label covering the largest share of its
/// pixels is adopted when that share reaches `min_overlap` (ties prefer the
/// smaller label); otherwise the segment is NEW, or skipped when it has fewer
/// than `min_new_pixels` pixels. A further label is merged into the adopted
/// one when the overlap reaches `min_overlap` both as a share of the segment
/// and as a share of that label's rendered pixels.
LabelCorrespondence propagate_labels(const RenderedSegmentMap& rendered,
                                     const FrameSegmentation& segmentation,
                                     double min_overlap = 0.3, int min_new_pixels = 0);

/// Applies a correspondence: NEW segments receive fresh table labels, merge
/// events fold records and surfel labels together, associated surfels take
/// their pixel's segment label unless it was skipped, and labels left without surfels are removed
/// from the table. Returns the number of merges applied.
int relabel_surfels(SurfelMap& map, SegmentTable& table, LabelCorrespondence& correspondence,
                    const FrameSegmentation& segmentation, const FusionResult& fusion);

using Rgb = std::array<std::uint8_t, 3>;

/// Fixed 256-colour palette; ids wrap modulo 256 and negative ids are grey.
Rgb palette_color(int id);

/// Binary little-endian PLY with x y z nx ny nz red green blue per surfel,
/// coloured by `id(surfel)` through the palette.
void write_ply(std::ostream& os, const SurfelMap& map, const std::function<int(const Surfel&)>& id);

}  // namespace opendisc
