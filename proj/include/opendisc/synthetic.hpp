#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>
#include <vector>

#include "opendisc/feature_packet.hpp"
#include "opendisc/frame.hpp"
#include "opendisc/io.hpp"
#include "opendisc/segment_table.hpp"

namespace opendisc {

/// A primitive placed in the room. Boxes are centred at `center` with full
/// extents `size` and rotated by `yaw` (radians) about +z. Cylinders stand
/// on `center.z` with radius size.x and height size.z. Pictures are
/// rectangles of width size.x and height size.z facing `normal`.
struct SceneObject {
  enum class Kind { kBox, kCylinder, kPicture };
  Kind kind = Kind::kBox;
  int class_id = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  double yaw = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitX();
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.5);
};

/// Room surface (floor, walls or ceiling).
struct SceneSurface {
  int class_id = 0;
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.8);
};

/// Camera path on a horizontal circle, every frame looking at `target`.
/// Angles in degrees, end inclusive.
struct Orbit {
  int frames = 1;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 1.0;
  double height = 1.4;
  double start_deg = 0.0;
  double end_deg = 0.0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();

  std::vector<Pose> poses() const;
};

struct SceneSpec {
  Eigen::Vector3d room{4.0, 3.5, 2.6};  // the room spans [0, room]
  ClassList classes;
  SceneSurface floor, walls, ceiling;
  std::vector<SceneObject> objects;
  std::vector<std::variant<Orbit, Pose>> trajectory;
  Intrinsics intrinsics{285.0, 285.0, 159.5, 119.5, 320, 240};
  Eigen::Vector3d light{0.3, 0.5, 0.8};  // direction towards the light
  bool depth_noise = false;
  std::uint64_t seed = 1;
  double feature_noise = 0.05;
  int feature_dim = kCnnDim;

  /// Throws std::invalid_argument on inconsistent content.
  void validate() const;
  std::vector<Pose> poses() const;
};

/// Line-based text format, one directive per line, '#' starts a comment.
SceneSpec parse_scene(std::istream& is);
SceneSpec read_scene(const std::filesystem::path& path);
void write_scene(std::ostream& os, const SceneSpec& spec);

/// The reference room: floor and walls, three trained furniture boxes
/// (table, chair, sofa), and two novel objects (a picture on the wall and a
/// vase), seen along a `frames`-long arc.
SceneSpec default_room(int frames = 60, bool depth_noise = false);

struct SyntheticFrame {
  Image<Rgb8> color;
  Image<float> depth;  // metres, quantised to millimetres
  Image<std::uint8_t> labels;  // class ids, kVoidClass where nothing is hit
  FeaturePacket packet;
  Pose pose;
};

/// Ray-casts frame t. Depth noise, when enabled, is Gaussian with the axial
/// sensor sigma at the true depth. Deep features are class basis vectors
/// plus Gaussian noise; probabilities are one-hot over the trained classes
/// for trained surfaces and uniform for novel ones.
SyntheticFrame render_synthetic(const SceneSpec& spec, int t);

/// Writes a full sequence directory (colour, depth, labels, features,
/// intrinsics, poses, classes and the scene itself).
void write_sequence(const SceneSpec& spec, const std::filesystem::path& dir);

}  // namespace opendisc
