#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opendisc/image.hpp"

namespace opendisc {

/// Per-pixel deep features (S channels) and class probabilities (N classes)
/// for one frame, both stored pixel-major: value (y * W + x) * C + c.
struct FeaturePacket {
  int width = 0;
  int height = 0;
  int feature_dim = 0;  // S
  int class_count = 0;  // N
  std::vector<float> features;
  std::vector<float> probabilities;
  int renormalized_pixels = 0;  // rows rescaled on load

  bool empty() const { return width == 0 || height == 0; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  Eigen::Map<const Eigen::VectorXf> feature(std::size_t pixel) const {
    return {features.data() + pixel * feature_dim, feature_dim};
  }
  Eigen::Map<const Eigen::VectorXf> probability(std::size_t pixel) const {
    return {probabilities.data() + pixel * class_count, class_count};
  }
  Eigen::Map<Eigen::VectorXf> feature(std::size_t pixel) {
    return {features.data() + pixel * feature_dim, feature_dim};
  }
  Eigen::Map<Eigen::VectorXf> probability(std::size_t pixel) {
    return {probabilities.data() + pixel * class_count, class_count};
  }

  /// Allocates zeroed storage.
  static FeaturePacket zeros(int width, int height, int feature_dim, int class_count);
};

/// Raised for malformed fixtures; the message names the frame index.
class PacketError : public std::runtime_error {
 public:
  PacketError(int frame, const std::string& what);
  int frame() const { return frame_; }

 private:
  int frame_;
};

enum class FeatureMode { kRequired, kOptional, kOff };

FeatureMode parse_feature_mode(const std::string& s);
std::string to_string(FeatureMode m);

inline constexpr char kPacketMagic[4] = {'F', 'P', 'K', '1'};

/// Reads an FPK1 fixture. Probability rows within 1e-3 of unit sum are
/// rescaled; anything further off, non-finite values, or a truncated file
/// throws PacketError naming frame `t`.
FeaturePacket load_packet(const std::filesystem::path& path, int t);

/// Writes an FPK1 fixture (little-endian header and float32 payload).
void save_packet(const std::filesystem::path& path, const FeaturePacket& packet);

/// Packet for frame t from `features/%06d.featpack` under a sequence
/// directory, honouring the mode: kOff never loads, kOptional returns nullopt
/// for a missing file, kRequired throws PacketError.
std::optional<FeaturePacket> load_frame_packet(const std::filesystem::path& sequence_dir, int t,
                                               FeatureMode mode);

/// Shannon entropy (natural log) of one distribution, with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar e = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar v = p(i);
    if (v > Scalar(0)) e -= v * std::log(v);
  }
  return std::max(e, Scalar(0));
}

/// Per-pixel entropy map of a packet's probabilities.
Image<float> compute_entropy(const FeaturePacket& packet);

}  // namespace opendisc
