#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <stdexcept>
#include <utility>

#include "opendisc/segmentation.hpp"

namespace opendisc {

void SlicParams::validate() const {
  if (target_superpixels <= 0 || !(alpha > 0.0) || !(beta > 0.0) || iterations <= 0) {
    throw std::invalid_argument("slic parameters must be positive");
  }
}

namespace {

struct Center {
  Vec3f lab;
  Vec3f normal;
  Eigen::Vector2f xy;
};

bool pixel_valid(const Frame& f, int x, int y) { return is_valid(f.vertex_map(x, y)); }

float lab_gradient(const Image<Vec3f>& lab, int x, int y) {
  const int w = lab.width(), h = lab.height();
  const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
  const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
  return (lab(xr, y) - lab(xl, y)).squaredNorm() + (lab(x, yd) - lab(x, yu)).squaredNorm();
}

std::optional<Eigen::Vector2i> seed_pixel(const Frame& f, int px, int py, int search) {
  // Lowest-gradient valid pixel in the 3x3 neighbourhood.
  float best = std::numeric_limits<float>::infinity();
  std::optional<Eigen::Vector2i> out;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = px + dx, y = py + dy;
      if (!f.depth.contains(x, y) || !pixel_valid(f, x, y)) continue;
      const float g = lab_gradient(f.color_lab, x, y);
      if (g < best) {
        best = g;
        out = Eigen::Vector2i(x, y);
      }
    }
  }
  if (out) return out;
  // Otherwise the nearest valid pixel, ring by ring.
  for (int r = 2; r <= search; ++r) {
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        if (std::max(std::abs(dx), std::abs(dy)) != r) continue;
        const int x = px + dx, y = py + dy;
        if (f.depth.contains(x, y) && pixel_valid(f, x, y)) return Eigen::Vector2i(x, y);
      }
    }
  }
  return std::nullopt;
}

bool depth_continuous(const Image<float>& depth, int i, int j) {
  return same_surface_depth(depth[i], depth[j]);
}

// Splits every label into components that are 4-connected without crossing
// a depth discontinuity, then folds stray components into a neighbour.
Image<int> enforce_connectivity(const Image<int>& labels, const Image<float>& depth) {
  const int w = labels.width(), h = labels.height();
  Image<int> comp(w, h, -1);
  std::vector<int> comp_label;
  std::vector<int> comp_size;
  std::deque<int> queue;
  for (int start = 0; start < static_cast<int>(labels.size()); ++start) {
    if (labels[start] == kNoSegment || comp[start] != -1) continue;
    const int c = static_cast<int>(comp_label.size());
    const int lab = labels[start];
    comp_label.push_back(lab);
    comp_size.push_back(0);
    comp[start] = c;
    queue.push_back(start);
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      ++comp_size[c];
      const int x = i % w, y = i / w;
      const int nbrs[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nbrs) {
        if (!labels.contains(n[0], n[1])) continue;
        const int j = n[1] * w + n[0];
        if (comp[j] == -1 && labels[j] == lab && depth_continuous(depth, i, j)) {
          comp[j] = c;
          queue.push_back(j);
        }
      }
    }
  }
  const int ncomp = static_cast<int>(comp_label.size());

  std::vector<std::set<int>> adjacent(ncomp);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int i = y * w + x;
      const int a = comp[i];
      if (a < 0) continue;
      for (const int j : {x + 1 < w ? i + 1 : -1, y + 1 < h ? i + w : -1}) {
        if (j < 0 || comp[j] < 0 || comp[j] == a || !depth_continuous(depth, i, j)) continue;
        adjacent[a].insert(comp[j]);
        adjacent[comp[j]].insert(a);
      }
    }
  }

  // The largest component of each label keeps it; every other component is
  // an orphan that joins the largest anchored neighbouring label.
  std::vector<int> main_comp;
  for (int c = 0; c < ncomp; ++c) {
    const int lab = comp_label[c];
    if (lab >= static_cast<int>(main_comp.size())) main_comp.resize(lab + 1, -1);
    if (main_comp[lab] == -1 || comp_size[c] > comp_size[main_comp[lab]]) main_comp[lab] = c;
  }
  std::vector<int> final_label(ncomp, -1);
  std::vector<long> label_size(main_comp.size(), 0);
  for (int lab = 0; lab < static_cast<int>(main_comp.size()); ++lab) {
    if (main_comp[lab] >= 0) {
      final_label[main_comp[lab]] = lab;
      label_size[lab] = comp_size[main_comp[lab]];
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (int c = 0; c < ncomp; ++c) {
      if (final_label[c] >= 0) continue;
      int best = -1;
      for (int n : adjacent[c]) {
        const int lab = final_label[n];
        if (lab < 0) continue;
        if (best < 0 || label_size[lab] > label_size[best] ||
            (label_size[lab] == label_size[best] && lab < best)) {
          best = lab;
        }
      }
      if (best >= 0) {
        final_label[c] = best;
        label_size[best] += comp_size[c];
        changed = true;
      }
    }
  }
  int next = static_cast<int>(label_size.size());
  for (int c = 0; c < ncomp; ++c) {
    if (final_label[c] < 0) final_label[c] = next++;
  }

  Image<int> out(w, h, kNoSegment);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (comp[i] >= 0) out[i] = final_label[comp[i]];
  }
  return out;
}

}  // namespace

FrameSegmentation run_slic(const Frame& frame, const SlicParams& params) {
  params.validate();
  const int w = frame.width(), h = frame.height();
  std::size_t valid = 0;
  for (const auto& v : frame.vertex_map.pixels()) valid += is_valid(v) ? 1 : 0;
  if (valid * 100 < static_cast<std::size_t>(w) * h || valid == 0) {
    throw std::runtime_error("insufficient geometry");
  }

  const double step = std::sqrt(static_cast<double>(w) * h / params.target_superpixels);
  const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / step)));
  const double sx = static_cast<double>(w) / nx;
  const double sy = static_cast<double>(h) / ny;
  const int radius = static_cast<int>(std::ceil(std::max(sx, sy)));
  const float alpha = static_cast<float>(params.alpha);
  const float beta = static_cast<float>(params.beta);

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int px = std::min(w - 1, static_cast<int>((i + 0.5) * sx));
      const int py = std::min(h - 1, static_cast<int>((j + 0.5) * sy));
      const auto seed = seed_pixel(frame, px, py, radius / 2);
      if (!seed) continue;
      const int x = seed->x(), y = seed->y();
      centers.push_back({frame.color_lab(x, y), frame.normal_map(x, y),
                         Eigen::Vector2f(static_cast<float>(x), static_cast<float>(y))});
    }
  }
  if (centers.empty()) {
    // Valid pixels exist but none near a grid seed: seed at the first one.
    for (int i = 0; i < static_cast<int>(frame.vertex_map.size()); ++i) {
      if (is_valid(frame.vertex_map[i])) {
        const int x = i % w, y = i / w;
        centers.push_back({frame.color_lab(x, y), frame.normal_map(x, y),
                           Eigen::Vector2f(static_cast<float>(x), static_cast<float>(y))});
        break;
      }
    }
  }

  Image<int> labels(w, h, kNoSegment);
  Image<float> dist(w, h);
  for (int it = 0; it < params.iterations; ++it) {
    labels.fill(kNoSegment);
    dist.fill(std::numeric_limits<float>::infinity());
    for (int k = 0; k < static_cast<int>(centers.size()); ++k) {
      const Center& c = centers[k];
      const int x0 = std::max(0, static_cast<int>(std::floor(c.xy.x())) - radius);
      const int x1 = std::min(w - 1, static_cast<int>(std::ceil(c.xy.x())) + radius);
      const int y0 = std::max(0, static_cast<int>(std::floor(c.xy.y())) - radius);
      const int y1 = std::min(h - 1, static_cast<int>(std::ceil(c.xy.y())) + radius);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!pixel_valid(frame, x, y)) continue;
          const Eigen::Vector2f xy(static_cast<float>(x), static_cast<float>(y));
          const float d = slic_distance<float>(frame.color_lab(x, y), frame.normal_map(x, y), xy,
                                               c.lab, c.normal, c.xy, alpha, beta);
          if (d < dist(x, y)) {
            dist(x, y) = d;
            labels(x, y) = k;
          }
        }
      }
    }
    // Pixels outside every window take the globally nearest center.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (labels(x, y) != kNoSegment || !pixel_valid(frame, x, y)) continue;
        const Eigen::Vector2f xy(static_cast<float>(x), static_cast<float>(y));
        for (int k = 0; k < static_cast<int>(centers.size()); ++k) {
          const Center& c = centers[k];
          const float d = slic_distance<float>(frame.color_lab(x, y), frame.normal_map(x, y), xy,
                                               c.lab, c.normal, c.xy, alpha, beta);
          if (d < dist(x, y)) {
            dist(x, y) = d;
            labels(x, y) = k;
          }
        }
      }
    }
    if (it + 1 == params.iterations) break;

    std::vector<Eigen::Vector3d> lab_sum(centers.size(), Eigen::Vector3d::Zero());
    std::vector<Eigen::Vector3d> n_sum(centers.size(), Eigen::Vector3d::Zero());
    std::vector<Eigen::Vector2d> xy_sum(centers.size(), Eigen::Vector2d::Zero());
    std::vector<int> count(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int k = labels(x, y);
        if (k < 0) continue;
        lab_sum[k] += frame.color_lab(x, y).cast<double>();
        xy_sum[k] += Eigen::Vector2d(x, y);
        const Vec3f& n = frame.normal_map(x, y);
        if (is_valid(n)) n_sum[k] += n.cast<double>();
        ++count[k];
      }
    }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (count[k] == 0) continue;
      centers[k].lab = (lab_sum[k] / count[k]).cast<float>();
      centers[k].xy = (xy_sum[k] / count[k]).cast<float>();
      const double nn = n_sum[k].norm();
      centers[k].normal = nn > 1e-9 ? Vec3f((n_sum[k] / nn).cast<float>()) : invalid_vec3();
    }
  }

  return summarize_labels(frame, enforce_connectivity(labels, frame.depth));
}

FrameSegmentation summarize_labels(const Frame& frame, Image<int> labels) {
  const int w = labels.width();
  std::vector<int> remap;
  int next = 0;
  for (auto& l : labels.pixels()) {
    if (l == kNoSegment) continue;
    if (l >= static_cast<int>(remap.size())) remap.resize(l + 1, -1);
    if (remap[l] < 0) remap[l] = next++;
    l = remap[l];
  }

  FrameSegmentation out;
  out.segments.resize(next);
  std::vector<Eigen::Vector3d> vsum(next, Eigen::Vector3d::Zero());
  std::vector<Eigen::Vector3d> nsum(next, Eigen::Vector3d::Zero());
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    const int l = labels[i];
    if (l == kNoSegment) continue;
    Superpixel& s = out.segments[l];
    s.pixel_count += 1;
    s.color_lab += frame.color_lab[i].cast<double>();
    vsum[l] += frame.vertex_map[i].cast<double>();
    s.centroid += Eigen::Vector2d(i % w, i / w);
    s.mean_depth += frame.vertex_map[i].z();
    if (is_valid(frame.normal_map[i])) {
      nsum[l] += frame.normal_map[i].cast<double>();
      s.normal_count += 1;
    }
  }
  for (int l = 0; l < next; ++l) {
    Superpixel& s = out.segments[l];
    s.id = l;
    const double n = s.pixel_count;
    s.color_lab /= n;
    s.centroid /= n;
    s.mean_depth /= n;
    s.vertex = to_world_point(frame.pose, Eigen::Vector3d(vsum[l] / n));
    s.normal_sum = to_world_direction(frame.pose, nsum[l]);
    const double nn = s.normal_sum.norm();
    if (s.normal_count > 0 && nn > 1e-9) s.normal = s.normal_sum / nn;
  }
  out.labels = std::move(labels);
  return out;
}

}  // namespace opendisc
