#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "opendisc/synthetic.hpp"

using namespace opendisc;
namespace fs = std::filesystem;

namespace {

SceneSpec empty_room_facing_wall(double distance, bool noise) {
  SceneSpec s = default_room(1, noise);
  s.objects.clear();
  const Eigen::Vector3d eye(2.0, s.room.y() - distance, 1.3);
  s.trajectory = {Pose::look_at(eye, eye + Eigen::Vector3d(0, 1, 0))};
  s.validate();
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("opendisc_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("fronto-parallel wall gives a constant depth plane") {
  const SyntheticFrame f = render_synthetic(empty_room_facing_wall(2.5, false), 0);
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    REQUIRE(f.depth[i] == doctest::Approx(2.5f));
    REQUIRE(f.labels[i] == 1);
  }
  // uniform shading on a plane
  CHECK(f.color(0, 0) == f.color(200, 150));
}

TEST_CASE("depth noise follows the axial model") {
  const SyntheticFrame f = render_synthetic(empty_room_facing_wall(1.4, true), 0);
  double sum = 0, sq = 0;
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    const double e = f.depth[i] - 1.4;
    sum += e;
    sq += e * e;
  }
  const double n = static_cast<double>(f.depth.size());
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::abs(sd - axial_noise_sigma(1.4)) <= 0.2 * axial_noise_sigma(1.4));
  CHECK(axial_noise_sigma(1.4) == doctest::Approx(0.0031));
}

TEST_CASE("reference room: labels, features and probabilities") {
  const SceneSpec spec = default_room(3, false);
  const SyntheticFrame f = render_synthetic(spec, 1);
  const int n = spec.classes.trained_count();
  REQUIRE(n == 5);
  std::vector<int> seen(spec.classes.size(), 0);
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    const int c = f.labels[i];
    REQUIRE(c != kVoidClass);
    CHECK((f.depth[i] > 0.0f) == (c != kVoidClass));
    ++seen[c];
    const double e = shannon_entropy(f.packet.probability(i).cast<double>());
    if (spec.classes.trained[c]) CHECK(e == 0.0);
    else CHECK(e == doctest::Approx(std::log(static_cast<double>(n))));
    int arg = 0;
    f.packet.feature(i).maxCoeff(&arg);
    CHECK(arg == c);
  }
  for (int c = 0; c < spec.classes.size(); ++c) {
    INFO("class " << spec.classes.names[c]);
    CHECK(seen[c] > 200);
  }
}

TEST_CASE("scene text round trip") {
  const SceneSpec spec = default_room(60, true);
  std::ostringstream a;
  write_scene(a, spec);
  std::istringstream in(a.str());
  const SceneSpec back = parse_scene(in);
  std::ostringstream b;
  write_scene(b, back);
  CHECK(a.str() == b.str());
  CHECK(back.poses().size() == 60);
  CHECK(back.objects.size() == 5);
  CHECK(back.depth_noise);

  std::istringstream bad("room 4 3 2\nclass a trained\nbox b 1 1 1 1 1 1 0 1 1 1\n");
  CHECK_THROWS_AS(parse_scene(bad), std::invalid_argument);
  std::istringstream unknown("teapot 1 2 3\n");
  CHECK_THROWS_AS(parse_scene(unknown), std::invalid_argument);
}

TEST_CASE("sequence output is byte-identical across runs and loads back") {
  SceneSpec spec = default_room(2, true);
  const fs::path a = scratch("a"), b = scratch("b");
  write_sequence(spec, a);
  write_sequence(spec, b);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    INFO(rel.string());
    CHECK(slurp(entry.path()) == slurp(b / rel));
  }

  const Sequence seq = Sequence::open(a);
  CHECK(seq.frame_count() == 2);
  CHECK(seq.intrinsics == spec.intrinsics);
  CHECK((seq.poses[1].rotation - spec.poses()[1].rotation).norm() < 1e-12);
  const Frame f = seq.load_frame(1);
  const SyntheticFrame s = render_synthetic(spec, 1);
  for (std::size_t i = 0; i < f.depth.size(); i += 101) CHECK(f.depth[i] == doctest::Approx(s.depth[i]).epsilon(1e-6));
  const auto labels = read_png_gray8(seq.label_path(1));
  CHECK(std::equal(labels.data(), labels.data() + labels.size(), s.labels.data()));
  const FeaturePacket p = load_packet(a / "features" / "000001.featpack", 1);
  CHECK(p.features == s.packet.features);
  CHECK(p.renormalized_pixels == 0);
  const ClassList classes = read_classes(a / "classes.txt");
  CHECK(classes.names == spec.classes.names);
  CHECK(classes.trained_count() == 5);
}

TEST_CASE("png codecs and text formats round trip") {
  const fs::path dir = scratch("io");
  Image<std::uint16_t> d(5, 3);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<std::uint16_t>(i * 4099);
  write_png_gray16(dir / "d.png", d);
  const auto d2 = read_png_gray16(dir / "d.png");
  CHECK(std::equal(d.data(), d.data() + d.size(), d2.data()));
  CHECK_THROWS_AS(read_png_rgb(dir / "d.png"), std::runtime_error);
  CHECK_THROWS_AS(read_png_rgb(dir / "missing.png"), std::runtime_error);

  Image<Rgb8> c(4, 2);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = Rgb8(i * 30, 255 - i, 7);
  write_png_rgb(dir / "c.png", c);
  const auto c2 = read_png_rgb(dir / "c.png");
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == c2[i]);

  std::ofstream(dir / "garbage.png") << "not a png";
  CHECK_THROWS_AS(read_png_gray8(dir / "garbage.png"), std::runtime_error);

  std::ofstream(dir / "poses.txt") << "1 0 0 0 0 1 0 0 0 0 1\n";
  CHECK_THROWS_AS(read_poses(dir / "poses.txt"), std::runtime_error);
  std::ofstream(dir / "poses.txt") << "2 0 0 0 0 1 0 0 0 0 1 0\n";
  CHECK_THROWS_AS(read_poses(dir / "poses.txt"), std::runtime_error);
  std::ofstream(dir / "intr.txt") << "285 285 400 120 320 240\n";
  CHECK_THROWS_AS(read_intrinsics(dir / "intr.txt"), std::invalid_argument);
  CHECK(frame_stem(42) == "000042");
}
