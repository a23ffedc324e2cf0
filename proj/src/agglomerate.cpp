#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include "opendisc/segmentation.hpp"

namespace opendisc {

void MergeThresholds::validate() const {
  if (!(sigma_lambda > 0.0) || !(noise_k >= 0.0) || !(sigma_phi >= -1.0 && sigma_phi <= 1.0)) {
    throw std::invalid_argument("merge thresholds out of range");
  }
}

MergePredicates merge_predicates(const Superpixel& a, const Superpixel& b) {
  const Eigen::Vector3d na = -a.normal;
  const Eigen::Vector3d nb = -b.normal;
  return merge_predicates<double>(a.color_lab, a.vertex, na, b.color_lab, b.vertex, nb);
}

bool should_merge(const Superpixel& a, const Superpixel& b, const MergeThresholds& t) {
  if (!a.geometry_valid() || !b.geometry_valid()) {
    return (a.color_lab - b.color_lab).norm() < 0.5 * t.sigma_lambda;
  }
  const MergePredicates ab = merge_predicates(a, b);
  if (!(ab.lambda < t.sigma_lambda)) return false;
  if (!(ab.psi < sigma_psi(a.mean_depth, t.noise_k)) || !(ab.phi > t.sigma_phi)) return false;
  const MergePredicates ba = merge_predicates(b, a);
  return ba.psi < sigma_psi(b.mean_depth, t.noise_k) && ba.phi > t.sigma_phi;
}

Superpixel combine(const Superpixel& a, const Superpixel& b) {
  Superpixel s;
  s.id = std::min(a.id, b.id);
  s.pixel_count = a.pixel_count + b.pixel_count;
  s.normal_count = a.normal_count + b.normal_count;
  const double wa = static_cast<double>(a.pixel_count) / s.pixel_count;
  const double wb = static_cast<double>(b.pixel_count) / s.pixel_count;
  s.color_lab = wa * a.color_lab + wb * b.color_lab;
  s.vertex = wa * a.vertex + wb * b.vertex;
  s.centroid = wa * a.centroid + wb * b.centroid;
  s.mean_depth = wa * a.mean_depth + wb * b.mean_depth;
  s.normal_sum = a.normal_sum + b.normal_sum;
  const double nn = s.normal_sum.norm();
  if (s.normal_count > 0 && nn > 1e-9) s.normal = s.normal_sum / nn;
  return s;
}

FrameSegmentation agglomerate(const FrameSegmentation& in, const MergeThresholds& t) {
  t.validate();
  const int n = static_cast<int>(in.segments.size());
  const int w = in.labels.width(), h = in.labels.height();

  std::vector<Superpixel> nodes = in.segments;
  for (int i = 0; i < n; ++i) nodes[i].id = i;
  std::vector<std::set<int>> adjacent(n);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int a = in.labels(x, y);
      if (a < 0) continue;
      if (x + 1 < w) {
        const int b = in.labels(x + 1, y);
        if (b >= 0 && b != a) adjacent[a].insert(b), adjacent[b].insert(a);
      }
      if (y + 1 < h) {
        const int b = in.labels(x, y + 1);
        if (b >= 0 && b != a) adjacent[a].insert(b), adjacent[b].insert(a);
      }
    }
  }

  // Ordered by (lambda, min id, max id); the first element merges next.
  using Key = std::tuple<double, int, int>;
  std::set<Key> queue;
  std::map<std::pair<int, int>, double> queued;
  auto consider = [&](int a, int b) {
    const int lo = std::min(a, b), hi = std::max(a, b);
    if (!should_merge(nodes[lo], nodes[hi], t)) return;
    const double lambda = (nodes[lo].color_lab - nodes[hi].color_lab).norm();
    queue.emplace(lambda, lo, hi);
    queued[{lo, hi}] = lambda;
  };
  auto forget = [&](int a, int b) {
    const int lo = std::min(a, b), hi = std::max(a, b);
    const auto it = queued.find({lo, hi});
    if (it == queued.end()) return;
    queue.erase(Key{it->second, lo, hi});
    queued.erase(it);
  };
  for (int a = 0; a < n; ++a) {
    for (int b : adjacent[a]) {
      if (a < b) consider(a, b);
    }
  }

  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  while (!queue.empty()) {
    const auto [lambda, keep, drop] = *queue.begin();
    for (int x : adjacent[keep]) forget(keep, x);
    for (int x : adjacent[drop]) forget(drop, x);
    nodes[keep] = combine(nodes[keep], nodes[drop]);
    parent[drop] = keep;
    for (int x : adjacent[drop]) {
      adjacent[x].erase(drop);
      if (x != keep) {
        adjacent[x].insert(keep);
        adjacent[keep].insert(x);
      }
    }
    adjacent[keep].erase(drop);
    adjacent[drop].clear();
    for (int x : adjacent[keep]) consider(keep, x);
  }

  auto root = [&](int i) {
    while (parent[i] != i) i = parent[i];
    return i;
  };
  FrameSegmentation out;
  out.labels = Image<int>(w, h, kNoSegment);
  std::vector<int> remap(n, -1);
  for (std::size_t i = 0; i < in.labels.size(); ++i) {
    const int l = in.labels[i];
    if (l < 0) continue;
    const int r = root(l);
    if (remap[r] < 0) {
      remap[r] = static_cast<int>(out.segments.size());
      out.segments.push_back(nodes[r]);
      out.segments.back().id = remap[r];
    }
    out.labels[i] = remap[r];
  }
  return out;
}

FrameSegmentation segment_frame(const Frame& frame, const SlicParams& slic,
                                const MergeThresholds& merge) {
  return agglomerate(run_slic(frame, slic), merge);
}

}  // namespace opendisc
