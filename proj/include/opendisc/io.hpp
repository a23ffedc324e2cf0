#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opendisc/frame.hpp"

namespace opendisc {

namespace fs = std::filesystem;

// PNG codecs. Readers throw std::runtime_error on files of a different
// channel count or bit depth.
Image<Rgb8> read_png_rgb(const fs::path& path);
Image<std::uint8_t> read_png_gray8(const fs::path& path);
Image<std::uint16_t> read_png_gray16(const fs::path& path);
void write_png_rgb(const fs::path& path, const Image<Rgb8>& img);
void write_png_gray8(const fs::path& path, const Image<std::uint8_t>& img);
void write_png_gray16(const fs::path& path, const Image<std::uint16_t>& img);

/// "fx fy cx cy width height" on one line.
Intrinsics read_intrinsics(const fs::path& path);
void write_intrinsics(const fs::path& path, const Intrinsics& intr);

/// One camera-to-world pose per line as a row-major 3x4 matrix.
std::vector<Pose> read_poses(const fs::path& path);
void write_poses(const fs::path& path, const std::vector<Pose>& poses);

/// Class names in id order. Each line of classes.txt is "<name> trained" or
/// "<name> novel"; only trained classes are scored by the network, so the
/// probability depth N equals trained_count().
struct ClassList {
  std::vector<std::string> names;
  std::vector<bool> trained;

  int size() const { return static_cast<int>(names.size()); }
  int trained_count() const;
  int id_of(const std::string& name) const;
};
ClassList read_classes(const fs::path& path);
void write_classes(const fs::path& path, const ClassList& classes);

inline constexpr std::uint8_t kVoidClass = 255;

/// Zero-padded six digit frame stem, e.g. 000042.
std::string frame_stem(int t);

/// A sequence directory: color/, depth/, optional features/ and labels/,
/// plus intrinsics.txt and poses.txt. Frame count is the number of poses.
struct Sequence {
  fs::path dir;
  Intrinsics intrinsics;
  std::vector<Pose> poses;

  static Sequence open(const fs::path& dir);
  int frame_count() const { return static_cast<int>(poses.size()); }
  /// Colour and depth (millimetres to metres) of frame t with derived maps.
  Frame load_frame(int t, const NormalSmoothing& smoothing = {}) const;
  fs::path label_path(int t) const;
  bool has_labels() const;
};

}  // namespace opendisc
