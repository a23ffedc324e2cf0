#include "opendisc/frame.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <vector>

namespace opendisc {

std::size_t Frame::valid_depth_count() const {
  return static_cast<std::size_t>(
      std::count_if(depth.pixels().begin(), depth.pixels().end(),
                    [](float d) { return d > 0.0f && std::isfinite(d); }));
}

Image<Vec3f> compute_vertex_map(const Image<float>& depth, const Intrinsics& intr) {
  if (!depth.same_shape(intr.width, intr.height)) {
    throw std::invalid_argument("compute_vertex_map: depth size does not match intrinsics");
  }
  Image<Vec3f> out(depth.width(), depth.height(), invalid_vec3());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const float d = depth(x, y);
      if (d > 0.0f && std::isfinite(d)) {
        out(x, y) = (static_cast<double>(d) * intr.ray<double>(x, y)).cast<float>();
      }
    }
  }
  return out;
}

Image<Vec3f> compute_normal_map(const Image<Vec3f>& vmap) {
  const int w = vmap.width();
  const int h = vmap.height();
  Image<Vec3f> out(w, h, invalid_vec3());
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const Vec3f& c = vmap(x, y);
      const Vec3f& l = vmap(x - 1, y);
      const Vec3f& r = vmap(x + 1, y);
      const Vec3f& u = vmap(x, y - 1);
      const Vec3f& d = vmap(x, y + 1);
      if (!is_valid(c) || !is_valid(l) || !is_valid(r) || !is_valid(u) || !is_valid(d)) {
        continue;
      }
      const Eigen::Vector3d n =
          (r - l).cast<double>().cross((d - u).cast<double>());
      const double norm = n.norm();
      if (norm < 1e-9) continue;
      Eigen::Vector3d nn = n / norm;
      if (nn.dot(c.cast<double>()) > 0.0) nn = -nn;
      out(x, y) = nn.cast<float>();
    }
  }
  return out;
}

void NormalSmoothing::validate() const {
  if (radius < 0) throw std::invalid_argument("smoothing radius must not be negative");
  if (!(sigma_space > 0.0)) throw std::invalid_argument("smoothing sigma_space must be positive");
  if (!(sigma_range_k > 0.0)) throw std::invalid_argument("smoothing sigma_range_k must be positive");
}

Image<float> bilateral_filter_depth(const Image<float>& depth, const NormalSmoothing& params) {
  params.validate();
  if (params.radius == 0) return depth;
  const int w = depth.width(), h = depth.height(), r = params.radius;
  std::vector<double> spatial((2 * r + 1) * (2 * r + 1));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      spatial[(dy + r) * (2 * r + 1) + dx + r] =
          std::exp(-(dx * dx + dy * dy) / (2.0 * params.sigma_space * params.sigma_space));
    }
  }
  Image<float> out(w, h, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float c = depth(x, y);
      if (!(c > 0.0f) || !std::isfinite(c)) continue;
      const double sr = params.sigma_range_k * axial_noise_sigma(c);
      const double inv_2sr2 = 1.0 / (2.0 * sr * sr);
      double sum = 0.0, weight = 0.0;
      for (int dy = std::max(-r, -y); dy <= std::min(r, h - 1 - y); ++dy) {
        for (int dx = std::max(-r, -x); dx <= std::min(r, w - 1 - x); ++dx) {
          const float d = depth(x + dx, y + dy);
          if (!(d > 0.0f) || !std::isfinite(d)) continue;
          const double diff = d - c;
          const double wgt = spatial[(dy + r) * (2 * r + 1) + dx + r] * std::exp(-diff * diff * inv_2sr2);
          sum += wgt * d;
          weight += wgt;
        }
      }
      out(x, y) = static_cast<float>(sum / weight);
    }
  }
  return out;
}

namespace {

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = srgb_to_linear(i / 255.0);
    return t;
  }();
  return table;
}

}  // namespace

Vec3f srgb_to_lab(const Rgb8& rgb) {
  const auto& lin = linear_table();
  const double r = lin[rgb[0]];
  const double g = lin[rgb[1]];
  const double b = lin[rgb[2]];
  // D65 reference white
  const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
  const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / 1.00000;
  const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
  const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
  return Vec3f(static_cast<float>(116.0 * fy - 16.0), static_cast<float>(500.0 * (fx - fy)),
               static_cast<float>(200.0 * (fy - fz)));
}

Image<Vec3f> srgb_to_lab(const Image<Rgb8>& rgb) {
  Image<Vec3f> out(rgb.width(), rgb.height());
  for (std::size_t i = 0; i < rgb.size(); ++i) out[i] = srgb_to_lab(rgb[i]);
  return out;
}

Frame make_frame(const Image<Rgb8>& rgb, Image<float> depth, const Intrinsics& intr,
                 const Pose& pose, int timestamp, const NormalSmoothing& smoothing) {
  intr.validate();
  pose.validate();
  if (!rgb.same_shape(depth)) {
    throw std::invalid_argument("make_frame: color and depth sizes differ");
  }
  Frame f;
  f.color_lab = srgb_to_lab(rgb);
  f.vertex_map = compute_vertex_map(depth, intr);
  f.normal_map = smoothing.radius == 0
                     ? compute_normal_map(f.vertex_map)
                     : compute_normal_map(compute_vertex_map(bilateral_filter_depth(depth, smoothing), intr));
  f.depth = std::move(depth);
  f.intrinsics = intr;
  f.pose = pose;
  f.timestamp = timestamp;
  return f;
}

}  // namespace opendisc
