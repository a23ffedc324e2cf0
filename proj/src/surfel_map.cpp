#include "opendisc/surfel_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

#include "opendisc/binary_io.hpp"

namespace opendisc {

namespace {

constexpr float kNearPlane = 0.05f;
constexpr char kMapMagic[4] = {'S', 'R', 'F', '1'};

// World-to-camera transform in float for the per-surfel loops.
struct CameraTransform {
  Eigen::Matrix3f rotation;
  Eigen::Vector3f translation;
  float fx, fy, cx, cy;

  CameraTransform(const Pose& pose, const Intrinsics& intr)
      : rotation(pose.rotation.transpose().cast<float>()),
        translation((-pose.rotation.transpose() * pose.translation).cast<float>()),
        fx(static_cast<float>(intr.fx)), fy(static_cast<float>(intr.fy)),
        cx(static_cast<float>(intr.cx)), cy(static_cast<float>(intr.cy)) {}

  Eigen::Vector3f apply(const Eigen::Vector3f& p) const { return rotation * p + translation; }
};

struct DisjointLabels {
  std::map<int, int> parent;
  int find(int x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return x;
    const int root = find(it->second);
    parent[x] = root;
    return root;
  }
};

}  // namespace

void FusionParams::validate() const {
  if (!(depth_gate_k > 0.0)) throw std::invalid_argument("depth gate must be positive");
  if (!(normal_gate_degrees > 0.0 && normal_gate_degrees <= 180.0)) {
    throw std::invalid_argument("normal gate must lie in (0, 180] degrees");
  }
}

FusionResult SurfelMap::fuse(const Frame& frame, const FusionParams& params) {
  params.validate();
  const int w = frame.width(), h = frame.height();
  const CameraTransform cam(frame.pose, frame.intrinsics);
  const float cos_gate = static_cast<float>(std::cos(params.normal_gate_degrees * EIGEN_PI / 180.0));

  Image<int> centre(w, h, -1);
  Image<float> centre_z(w, h, std::numeric_limits<float>::infinity());
  for (std::size_t i = 0; i < surfels_.size(); ++i) {
    const Eigen::Vector3f pc = cam.apply(surfels_[i].position);
    if (pc.z() <= kNearPlane) continue;
    const int x = static_cast<int>(std::lround(cam.fx * pc.x() / pc.z() + cam.cx));
    const int y = static_cast<int>(std::lround(cam.fy * pc.y() / pc.z() + cam.cy));
    if (!centre.contains(x, y) || pc.z() >= centre_z(x, y)) continue;
    centre_z(x, y) = pc.z();
    centre(x, y) = static_cast<int>(i);
  }
  const Surfel* base = surfels_.data();
  const RenderedSegmentMap splat =
      render(frame.pose, frame.intrinsics, [base](const Surfel& s) { return static_cast<int>(&s - base); });

  FusionResult result;
  result.association = Image<int>(w, h, -1);
  const Eigen::Matrix3f r_world = frame.pose.rotation.cast<float>();
  const Eigen::Vector3f t_world = frame.pose.translation.cast<float>();
  const float inv_fx = 1.0f / cam.fx;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3f& v = frame.vertex_map(x, y);
      const Vec3f& n = frame.normal_map(x, y);
      if (!is_valid(v) || !is_valid(n)) continue;
      const float d = v.z();
      const Eigen::Vector3f nw = r_world * n;
      const float gate = static_cast<float>(params.depth_gate_k * axial_noise_sigma(d));
      auto passes = [&](int idx) {
        if (idx < 0) return false;
        const Surfel& s = surfels_[idx];
        const float z = cam.apply(s.position).z();
        return std::abs(z - d) <= gate && s.normal.dot(nw) >= cos_gate;
      };

      const int c = centre(x, y);
      if (passes(c)) {
        Surfel& s = surfels_[c];
        const Eigen::Vector3f vw = r_world * v + t_world;
        const float conf = s.confidence;
        s.position = (conf * s.position + vw) / (conf + 1.0f);
        const Eigen::Vector3f blended = conf * s.normal + nw;
        if (blended.norm() > 1e-12f) s.normal = blended.normalized();
        s.radius = std::min(s.radius, d * inv_fx * std::numbers::sqrt2_v<float>);
        s.confidence = conf + 1.0f;
        result.association(x, y) = c;
        ++result.updated;
        continue;
      }
      const int covering = splat.labels(x, y);
      if (covering != c && passes(covering)) {
        result.association(x, y) = covering;
        ++result.covered;
        continue;
      }
      Surfel s;
      s.position = r_world * v + t_world;
      s.normal = nw.normalized();
      s.radius = d * inv_fx * std::numbers::sqrt2_v<float>;
      s.confidence = 1.0f;
      result.association(x, y) = static_cast<int>(surfels_.size());
      surfels_.push_back(s);
      ++result.inserted;
    }
  }
  return result;
}

RenderedSegmentMap SurfelMap::render(const Pose& pose, const Intrinsics& intr,
                                     const std::function<int(const Surfel&)>& id) const {
  const int w = intr.width, h = intr.height;
  RenderedSegmentMap out{Image<int>(w, h, -1), Image<float>(w, h, 0.0f)};
  Image<float> zbuf(w, h, std::numeric_limits<float>::infinity());
  const CameraTransform cam(pose, intr);

  for (const Surfel& s : surfels_) {
    const Eigen::Vector3f pc = cam.apply(s.position);
    const float z = pc.z();
    if (z <= kNearPlane) continue;
    const float u = cam.fx * pc.x() / z + cam.cx;
    const float v = cam.fy * pc.y() / z + cam.cy;
    const float r = s.radius * cam.fx / z;
    const int ext = static_cast<int>(std::ceil(r));
    const int cu = static_cast<int>(std::lround(u)), cv = static_cast<int>(std::lround(v));
    if (cu + ext < 0 || cv + ext < 0 || cu - ext >= w || cv - ext >= h) continue;
    const int value = id(s);
    for (int y = cv - ext; y <= cv + ext; ++y) {
      for (int x = cu - ext; x <= cu + ext; ++x) {
        if (!zbuf.contains(x, y)) continue;
        const float dx = static_cast<float>(x) - u, dy = static_cast<float>(y) - v;
        if ((x != cu || y != cv) && dx * dx + dy * dy > r * r) continue;
        if (z >= zbuf(x, y)) continue;
        zbuf(x, y) = z;
        out.labels(x, y) = value;
        out.depth(x, y) = z;
      }
    }
  }
  return out;
}

RenderedSegmentMap SurfelMap::render_labels(const Pose& pose, const Intrinsics& intr) const {
  return render(pose, intr, [](const Surfel& s) { return static_cast<int>(s.label); });
}

void SurfelMap::remap_labels(const std::vector<int>& mapping) {
  for (Surfel& s : surfels_) {
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < mapping.size()) s.label = mapping[s.label];
  }
}

std::vector<std::uint64_t> SurfelMap::label_histogram() const {
  std::vector<std::uint64_t> hist;
  for (const Surfel& s : surfels_) {
    if (s.label < 0) continue;
    if (static_cast<std::size_t>(s.label) >= hist.size()) hist.resize(s.label + 1, 0);
    ++hist[s.label];
  }
  return hist;
}

void SurfelMap::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMapMagic, 4);
  binio::put<std::uint64_t>(os, surfels_.size());
  for (const Surfel& s : surfels_) {
    binio::put_span(os, s.position.data(), 3);
    binio::put_span(os, s.normal.data(), 3);
    binio::put<float>(os, s.radius);
    binio::put<float>(os, s.confidence);
    binio::put<std::int32_t>(os, s.label);
  }
}

SurfelMap SurfelMap::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  binio::expect_magic(is, kMapMagic, path);
  SurfelMap map;
  const auto n = binio::get<std::uint64_t>(is);
  map.surfels_.resize(n);
  for (Surfel& s : map.surfels_) {
    binio::get_span(is, s.position.data(), 3);
    binio::get_span(is, s.normal.data(), 3);
    s.radius = binio::get<float>(is);
    s.confidence = binio::get<float>(is);
    s.label = binio::get<std::int32_t>(is);
  }
  return map;
}

std::size_t discard_off_surface(RenderedSegmentMap& rendered, const Image<float>& depth) {
  if (!rendered.labels.same_shape(depth)) {
    throw std::invalid_argument("discard_off_surface: rendered map and depth differ in size");
  }
  std::size_t cleared = 0;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (rendered.labels[i] < 0) continue;
    if (depth[i] > 0.0f && same_surface_depth(rendered.depth[i], depth[i])) continue;
    rendered.labels[i] = -1;
    rendered.depth[i] = 0.0f;
    ++cleared;
  }
  return cleared;
}

LabelCorrespondence propagate_labels(const RenderedSegmentMap& rendered,
                                     const FrameSegmentation& segmentation, double min_overlap,
                                     int min_new_pixels) {
  if (!rendered.labels.same_shape(segmentation.labels)) {
    throw std::invalid_argument("propagate_labels: rendered map and segmentation differ in size");
  }
  const std::size_t count = segmentation.segments.size();
  std::vector<std::map<int, std::uint64_t>> overlap(count);
  std::vector<std::uint64_t> total(count, 0);
  std::map<int, std::uint64_t> label_area;  // rendered pixels per map label
  for (std::size_t i = 0; i < rendered.labels.size(); ++i) {
    const int l = rendered.labels[i];
    if (l >= 0) ++label_area[l];
    const int f = segmentation.labels[i];
    if (f < 0) continue;
    ++total[f];
    if (l >= 0) ++overlap[f][l];
  }

  LabelCorrespondence c;
  c.label_of.assign(count, LabelCorrespondence::kNew);
  c.overlap.assign(count, 0.0);
  for (std::size_t f = 0; f < count; ++f) {
    if (total[f] == 0) continue;
    int best = -1;
    std::uint64_t best_count = 0;
    for (const auto& [l, n] : overlap[f]) {
      if (n > best_count) {  // ascending label order keeps the smaller label on ties
        best = l;
        best_count = n;
      }
    }
    const double ratio = static_cast<double>(best_count) / static_cast<double>(total[f]);
    c.overlap[f] = ratio;
    if (best < 0 || ratio < min_overlap) {
      if (total[f] < static_cast<std::uint64_t>(std::max(min_new_pixels, 0))) {
        c.label_of[f] = LabelCorrespondence::kSkip;
      }
      continue;
    }
    c.label_of[f] = best;
    for (const auto& [l, n] : overlap[f]) {
      if (l == best) continue;
      const double share_of_segment = static_cast<double>(n) / static_cast<double>(total[f]);
      const double share_of_label = static_cast<double>(n) / static_cast<double>(label_area[l]);
      if (share_of_segment >= min_overlap && share_of_label >= min_overlap) {
        c.merges.emplace_back(best, l);
      }
    }
  }
  return c;
}

int relabel_surfels(SurfelMap& map, SegmentTable& table, LabelCorrespondence& correspondence,
                    const FrameSegmentation& segmentation, const FusionResult& fusion) {
  DisjointLabels sets;
  int merges = 0;
  for (const auto& [winner, loser] : correspondence.merges) {
    const int rw = sets.find(winner), rl = sets.find(loser);
    if (rw == rl || !table.contains(rw) || !table.contains(rl)) continue;
    sets.parent[rl] = rw;
    table.merge(rw, rl);
    ++merges;
  }
  if (merges > 0) {
    std::vector<int> mapping(table.next_label());
    for (int l = 0; l < table.next_label(); ++l) mapping[l] = sets.find(l);
    map.remap_labels(mapping);
  }
  for (int& l : correspondence.label_of) {
    if (l == LabelCorrespondence::kNew) l = table.create();
    else if (l >= 0) l = sets.find(l);
  }

  auto& surfels = map.surfels();
  for (std::size_t i = 0; i < fusion.association.size(); ++i) {
    const int s = fusion.association[i];
    const int f = segmentation.labels[i];
    if (s < 0 || f < 0 || correspondence.label_of[f] == LabelCorrespondence::kSkip) continue;
    surfels[s].label = correspondence.label_of[f];
  }

  const auto hist = map.label_histogram();
  for (int l : table.labels()) {
    const std::uint64_t n = static_cast<std::size_t>(l) < hist.size() ? hist[l] : 0;
    if (n == 0) table.erase(l);
    else table.at(l).surfel_count = n;
  }
  return merges;
}

Rgb palette_color(int id) {
  static const std::array<Rgb, 256> table = [] {
    std::array<Rgb, 256> t{};
    for (int i = 0; i < 256; ++i) {
      // golden-angle hue walk with three brightness bands
      const double hue = std::fmod(i * 137.50776405, 360.0) / 60.0;
      const double value = 1.0 - 0.25 * (i % 3);
      const double sat = 0.65 + 0.1 * ((i / 3) % 3);
      const double c = value * sat;
      const double x = c * (1.0 - std::abs(std::fmod(hue, 2.0) - 1.0));
      const double m = value - c;
      double r = 0, g = 0, b = 0;
      switch (static_cast<int>(hue)) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
      }
      auto q = [m](double ch) { return static_cast<std::uint8_t>(std::lround((ch + m) * 255.0)); };
      t[i] = {q(r), q(g), q(b)};
    }
    return t;
  }();
  if (id < 0) return {128, 128, 128};
  return table[id % 256];
}

void write_ply(std::ostream& os, const SurfelMap& map, const std::function<int(const Surfel&)>& id) {
  os << "ply\nformat binary_little_endian 1.0\n"
     << "element vertex " << map.size() << '\n'
     << "property float x\nproperty float y\nproperty float z\n"
     << "property float nx\nproperty float ny\nproperty float nz\n"
     << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
     << "end_header\n";
  for (const Surfel& s : map.surfels()) {
    binio::put_span(os, s.position.data(), 3);
    binio::put_span(os, s.normal.data(), 3);
    const Rgb c = palette_color(id(s));
    os.write(reinterpret_cast<const char*>(c.data()), 3);
  }
}

}  // namespace opendisc
