#include "opendisc/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace opendisc {

namespace {

constexpr double kDegToRad = EIGEN_PI / 180.0;
constexpr double kMinHit = 1e-6;
constexpr double kMaxRange = 10.0;

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int class_id = -1;
  Eigen::Vector3d albedo = Eigen::Vector3d::Zero();

  void offer(double t_new, const Eigen::Vector3d& n, int cls, const Eigen::Vector3d& a) {
    if (t_new > kMinHit && t_new < t) {
      t = t_new;
      normal = n;
      class_id = cls;
      albedo = a;
    }
  }
};

void hit_room(const SceneSpec& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  for (int axis = 0; axis < 3; ++axis) {
    if (d(axis) == 0.0) continue;
    const bool positive = d(axis) > 0.0;
    const double t = ((positive ? s.room(axis) : 0.0) - o(axis)) / d(axis);
    Eigen::Vector3d n = Eigen::Vector3d::Zero();
    n(axis) = positive ? -1.0 : 1.0;
    const SceneSurface& surf = axis < 2 ? s.walls : (positive ? s.ceiling : s.floor);
    hit.offer(t, n, surf.class_id, surf.albedo);
  }
}

void hit_box(const SceneObject& b, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  const Eigen::Matrix3d rot = yaw_rotation(b.yaw);
  const Eigen::Vector3d lo = rot.transpose() * (o - b.center);
  const Eigen::Vector3d ld = rot.transpose() * d;
  const Eigen::Vector3d half = b.size / 2;
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  int near_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (ld(a) == 0.0) {
      if (std::abs(lo(a)) > half(a)) return;
      continue;
    }
    double t1 = (-half(a) - lo(a)) / ld(a);
    double t2 = (half(a) - lo(a)) / ld(a);
    if (t1 > t2) std::swap(t1, t2);
    if (t1 > t_near) {
      t_near = t1;
      near_axis = a;
    }
    t_far = std::min(t_far, t2);
  }
  if (near_axis < 0 || t_near > t_far) return;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n(near_axis) = ld(near_axis) > 0 ? -1.0 : 1.0;
  hit.offer(t_near, rot * n, b.class_id, b.albedo);
}

void hit_cylinder(const SceneObject& c, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  const double r = c.size.x(), z0 = c.center.z(), z1 = c.center.z() + c.size.z();
  const double ox = o.x() - c.center.x(), oy = o.y() - c.center.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 0.0) {
    const double b = 2 * (ox * d.x() + oy * d.y());
    const double cc = ox * ox + oy * oy - r * r;
    const double disc = b * b - 4 * a * cc;
    if (disc >= 0.0) {
      const double t = (-b - std::sqrt(disc)) / (2 * a);
      const double z = o.z() + t * d.z();
      if (z >= z0 && z <= z1) {
        const Eigen::Vector3d n = Eigen::Vector3d(ox + t * d.x(), oy + t * d.y(), 0.0).normalized();
        hit.offer(t, n, c.class_id, c.albedo);
      }
    }
  }
  if (d.z() < 0.0) {
    const double t = (z1 - o.z()) / d.z();
    const double px = ox + t * d.x(), py = oy + t * d.y();
    if (px * px + py * py <= r * r) hit.offer(t, Eigen::Vector3d::UnitZ(), c.class_id, c.albedo);
  }
}

void hit_picture(const SceneObject& p, const Eigen::Vector3d& o, const Eigen::Vector3d& d, Hit& hit) {
  const double dn = d.dot(p.normal);
  if (dn >= 0.0) return;
  const double t = (p.center - o).dot(p.normal) / dn;
  const Eigen::Vector3d q = o + t * d - p.center;
  const Eigen::Vector3d right = Eigen::Vector3d::UnitZ().cross(p.normal).normalized();
  const Eigen::Vector3d up = p.normal.cross(right);
  if (std::abs(q.dot(right)) <= p.size.x() / 2 && std::abs(q.dot(up)) <= p.size.z() / 2) {
    hit.offer(t, p.normal, p.class_id, p.albedo);
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

std::uint64_t stream_seed(std::uint64_t seed, int t, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

[[noreturn]] void parse_error(int line, const std::string& what) {
  throw std::invalid_argument("scene line " + std::to_string(line) + ": " + what);
}

Eigen::Vector3d read_vec3(std::istream& is) {
  Eigen::Vector3d v;
  is >> v.x() >> v.y() >> v.z();
  return v;
}

}  // namespace

std::vector<Pose> Orbit::poses() const {
  std::vector<Pose> out;
  out.reserve(frames);
  for (int i = 0; i < frames; ++i) {
    const double f = frames == 1 ? 0.0 : static_cast<double>(i) / (frames - 1);
    const double angle = (start_deg + f * (end_deg - start_deg)) * kDegToRad;
    const Eigen::Vector3d eye(center.x() + radius * std::cos(angle),
                              center.y() + radius * std::sin(angle), height);
    out.push_back(Pose::look_at(eye, target));
  }
  return out;
}

void SceneSpec::validate() const {
  intrinsics.validate();
  if ((room.array() <= 0.0).any()) throw std::invalid_argument("room extents must be positive");
  const int n = classes.size();
  if (n == 0) throw std::invalid_argument("scene declares no classes");
  if (classes.trained_count() < 2) throw std::invalid_argument("scene needs at least two trained classes");
  if (n > feature_dim) throw std::invalid_argument("more classes than feature dimensions");
  auto check_class = [n](int c) {
    if (c < 0 || c >= n) throw std::invalid_argument("class id out of range");
  };
  check_class(floor.class_id);
  check_class(walls.class_id);
  check_class(ceiling.class_id);
  for (const SceneObject& o : objects) {
    check_class(o.class_id);
    if ((o.size.array() <= 0.0).any() && o.kind != SceneObject::Kind::kPicture) {
      throw std::invalid_argument("object sizes must be positive");
    }
    if ((o.center.array() < 0.0).any() || (o.center.array() > room.array()).any()) {
      throw std::invalid_argument("object centre outside the room");
    }
    if (o.kind == SceneObject::Kind::kPicture &&
        (std::abs(o.normal.norm() - 1.0) > 1e-6 || std::abs(o.normal.z()) > 0.99)) {
      throw std::invalid_argument("picture normal must be a unit, non-vertical vector");
    }
  }
  if (feature_noise < 0.0) throw std::invalid_argument("feature noise must be nonnegative");
  const auto all = poses();
  if (all.empty()) throw std::invalid_argument("scene has an empty trajectory");
  for (const Pose& p : all) {
    p.validate();
    if ((p.translation.array() <= 0.0).any() || (p.translation.array() >= room.array()).any()) {
      throw std::invalid_argument("camera outside the room");
    }
  }
}

std::vector<Pose> SceneSpec::poses() const {
  std::vector<Pose> out;
  for (const auto& leg : trajectory) {
    if (const auto* orbit = std::get_if<Orbit>(&leg)) {
      const auto p = orbit->poses();
      out.insert(out.end(), p.begin(), p.end());
    } else {
      out.push_back(std::get<Pose>(leg));
    }
  }
  return out;
}

SceneSpec parse_scene(std::istream& is) {
  SceneSpec s;
  s.trajectory.clear();
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    auto class_id = [&](const std::string& name) {
      const int id = s.classes.id_of(name);
      if (id < 0) parse_error(line_no, "unknown class '" + name + "'");
      return id;
    };
    if (key == "room") {
      s.room = read_vec3(ls);
    } else if (key == "camera") {
      ls >> s.intrinsics.fx >> s.intrinsics.fy >> s.intrinsics.cx >> s.intrinsics.cy >>
          s.intrinsics.width >> s.intrinsics.height;
    } else if (key == "class") {
      std::string name, kind;
      ls >> name >> kind;
      if (kind != "trained" && kind != "novel") parse_error(line_no, "class kind must be trained or novel");
      s.classes.names.push_back(name);
      s.classes.trained.push_back(kind == "trained");
    } else if (key == "surface") {
      std::string which, cls;
      ls >> which >> cls;
      SceneSurface surf{class_id(cls), read_vec3(ls)};
      if (which == "floor") s.floor = surf;
      else if (which == "walls") s.walls = surf;
      else if (which == "ceiling") s.ceiling = surf;
      else parse_error(line_no, "surface must be floor, walls or ceiling");
    } else if (key == "box" || key == "cylinder" || key == "picture") {
      SceneObject o;
      std::string cls;
      ls >> cls;
      o.class_id = class_id(cls);
      if (key == "box") {
        o.kind = SceneObject::Kind::kBox;
        o.center = read_vec3(ls);
        o.size = read_vec3(ls);
        double yaw_deg = 0;
        ls >> yaw_deg;
        o.yaw = yaw_deg * kDegToRad;
      } else if (key == "cylinder") {
        o.kind = SceneObject::Kind::kCylinder;
        double r = 0, h = 0;
        o.center = read_vec3(ls);
        ls >> r >> h;
        o.size = Eigen::Vector3d(r, r, h);
      } else {
        o.kind = SceneObject::Kind::kPicture;
        double w = 0, h = 0;
        o.center = read_vec3(ls);
        o.normal = read_vec3(ls).normalized();
        ls >> w >> h;
        o.size = Eigen::Vector3d(w, 0.0, h);
      }
      o.albedo = read_vec3(ls);
      s.objects.push_back(o);
    } else if (key == "orbit") {
      Orbit o;
      ls >> o.frames >> o.center.x() >> o.center.y() >> o.radius >> o.height >> o.start_deg >> o.end_deg;
      o.target = read_vec3(ls);
      if (o.frames <= 0) parse_error(line_no, "orbit needs a positive frame count");
      s.trajectory.push_back(o);
    } else if (key == "pose") {
      Pose p;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) ls >> p.rotation(r, c);
        ls >> p.translation(r);
      }
      s.trajectory.push_back(p);
    } else if (key == "light") {
      s.light = read_vec3(ls);
    } else if (key == "noise") {
      std::string v;
      ls >> v;
      if (v != "on" && v != "off") parse_error(line_no, "noise must be on or off");
      s.depth_noise = v == "on";
    } else if (key == "seed") {
      ls >> s.seed;
    } else if (key == "feature_noise") {
      ls >> s.feature_noise;
    } else if (key == "feature_dim") {
      ls >> s.feature_dim;
    } else {
      parse_error(line_no, "unknown directive '" + key + "'");
    }
    if (ls.fail()) parse_error(line_no, "malformed '" + key + "' directive");
  }
  s.validate();
  return s;
}

SceneSpec read_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return parse_scene(is);
}

void write_scene(std::ostream& os, const SceneSpec& s) {
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::setprecision(12);
  auto vec = [&os](const Eigen::Vector3d& v) { os << ' ' << v.x() << ' ' << v.y() << ' ' << v.z(); };
  const auto& names = s.classes.names;
  os << "room";
  vec(s.room);
  os << "\ncamera " << s.intrinsics.fx << ' ' << s.intrinsics.fy << ' ' << s.intrinsics.cx << ' '
     << s.intrinsics.cy << ' ' << s.intrinsics.width << ' ' << s.intrinsics.height << '\n';
  for (int i = 0; i < s.classes.size(); ++i) {
    os << "class " << names[i] << ' ' << (s.classes.trained[i] ? "trained" : "novel") << '\n';
  }
  const std::pair<const char*, const SceneSurface*> surfaces[] = {
      {"floor", &s.floor}, {"walls", &s.walls}, {"ceiling", &s.ceiling}};
  for (const auto& [name, surf] : surfaces) {
    os << "surface " << name << ' ' << names[surf->class_id];
    vec(surf->albedo);
    os << '\n';
  }
  for (const SceneObject& o : s.objects) {
    switch (o.kind) {
      case SceneObject::Kind::kBox:
        os << "box " << names[o.class_id];
        vec(o.center);
        vec(o.size);
        os << ' ' << o.yaw / kDegToRad;
        break;
      case SceneObject::Kind::kCylinder:
        os << "cylinder " << names[o.class_id];
        vec(o.center);
        os << ' ' << o.size.x() << ' ' << o.size.z();
        break;
      case SceneObject::Kind::kPicture:
        os << "picture " << names[o.class_id];
        vec(o.center);
        vec(o.normal);
        os << ' ' << o.size.x() << ' ' << o.size.z();
        break;
    }
    vec(o.albedo);
    os << '\n';
  }
  os << "light";
  vec(s.light);
  os << "\nnoise " << (s.depth_noise ? "on" : "off") << "\nseed " << s.seed
     << "\nfeature_noise " << s.feature_noise << "\nfeature_dim " << s.feature_dim << '\n';
  for (const auto& leg : s.trajectory) {
    if (const auto* o = std::get_if<Orbit>(&leg)) {
      os << "orbit " << o->frames << ' ' << o->center.x() << ' ' << o->center.y() << ' ' << o->radius
         << ' ' << o->height << ' ' << o->start_deg << ' ' << o->end_deg;
      vec(o->target);
      os << '\n';
    } else {
      const Pose& p = std::get<Pose>(leg);
      os << "pose" << std::setprecision(17);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) os << ' ' << p.rotation(r, c);
        os << ' ' << p.translation(r);
      }
      os << std::setprecision(12) << '\n';
    }
  }
  os.flags(flags);
  os.precision(precision);
}

SceneSpec default_room(int frames, bool depth_noise) {
  SceneSpec s;
  s.classes.names = {"floor", "wall", "table", "chair", "sofa", "picture", "vase"};
  s.classes.trained = {true, true, true, true, true, false, false};
  s.floor = {0, {0.55, 0.45, 0.35}};
  s.walls = {1, {0.85, 0.84, 0.78}};
  s.ceiling = {1, {0.92, 0.92, 0.92}};

  auto box = [](int cls, Eigen::Vector3d c, Eigen::Vector3d size, double yaw_deg, Eigen::Vector3d a) {
    SceneObject o;
    o.kind = SceneObject::Kind::kBox;
    o.class_id = cls;
    o.center = c;
    o.size = size;
    o.yaw = yaw_deg * kDegToRad;
    o.albedo = a;
    return o;
  };
  s.objects.push_back(box(2, {2.0, 2.0, 0.375}, {1.0, 0.6, 0.75}, 0.0, {0.60, 0.30, 0.15}));
  s.objects.push_back(box(3, {0.95, 2.1, 0.45}, {0.45, 0.45, 0.9}, 20.0, {0.20, 0.35, 0.65}));
  s.objects.push_back(box(4, {2.0, 3.05, 0.4}, {1.6, 0.8, 0.8}, 0.0, {0.30, 0.55, 0.30}));

  SceneObject picture;
  picture.kind = SceneObject::Kind::kPicture;
  picture.class_id = 5;
  picture.center = {2.0, 3.49, 1.45};
  picture.normal = -Eigen::Vector3d::UnitY();
  picture.size = {1.0, 0.0, 0.6};
  picture.albedo = {0.80, 0.15, 0.20};
  s.objects.push_back(picture);

  SceneObject vase;
  vase.kind = SceneObject::Kind::kCylinder;
  vase.class_id = 6;
  vase.center = {2.25, 1.95, 0.75};
  vase.size = {0.1, 0.1, 0.35};
  vase.albedo = {0.85, 0.70, 0.20};
  s.objects.push_back(vase);

  Orbit orbit;
  orbit.frames = frames;
  orbit.center = {2.0, 1.75};
  orbit.radius = 1.6;
  orbit.height = 1.4;
  orbit.start_deg = 200.0;
  orbit.end_deg = 340.0;
  orbit.target = {2.0, 2.5, 0.9};
  s.trajectory = {orbit};
  s.depth_noise = depth_noise;
  s.seed = 20190711;
  s.validate();
  return s;
}

SyntheticFrame render_synthetic(const SceneSpec& spec, int t) {
  const auto poses = spec.poses();
  if (t < 0 || t >= static_cast<int>(poses.size())) throw std::out_of_range("frame outside trajectory");
  const Intrinsics& k = spec.intrinsics;
  const int w = k.width, h = k.height;
  SyntheticFrame f;
  f.pose = poses[t];
  f.color = Image<Rgb8>(w, h, Rgb8(0, 0, 0));
  f.depth = Image<float>(w, h, 0.0f);
  f.labels = Image<std::uint8_t>(w, h, kVoidClass);
  const int n_trained = spec.classes.trained_count();
  f.packet = FeaturePacket::zeros(w, h, spec.feature_dim, n_trained);

  std::vector<int> trained_index(spec.classes.size(), -1);
  for (int c = 0, next = 0; c < spec.classes.size(); ++c) {
    if (spec.classes.trained[c]) trained_index[c] = next++;
  }

  std::mt19937_64 depth_rng(stream_seed(spec.seed, t, 1));
  std::mt19937_64 feature_rng(stream_seed(spec.seed, t, 2));
  std::normal_distribution<double> gauss;
  const Eigen::Vector3d light = spec.light.normalized();
  const Eigen::Vector3d origin = f.pose.translation;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const Eigen::Vector3d dir = f.pose.rotation * k.ray<double>(x, y);
      Hit hit;
      hit_room(spec, origin, dir, hit);
      for (const SceneObject& o : spec.objects) {
        switch (o.kind) {
          case SceneObject::Kind::kBox: hit_box(o, origin, dir, hit); break;
          case SceneObject::Kind::kCylinder: hit_cylinder(o, origin, dir, hit); break;
          case SceneObject::Kind::kPicture: hit_picture(o, origin, dir, hit); break;
        }
      }
      auto feature = f.packet.feature(i);
      auto prob = f.packet.probability(i);
      if (hit.class_id < 0 || hit.t > kMaxRange) {
        prob.setConstant(1.0f / static_cast<float>(n_trained));
        continue;
      }
      double z = hit.t;
      if (spec.depth_noise) z += axial_noise_sigma(hit.t) * gauss(depth_rng);
      const double mm = std::round(z * 1000.0);
      f.depth(x, y) = static_cast<float>(mm * 0.001);
      f.labels(x, y) = static_cast<std::uint8_t>(hit.class_id);

      const double shade = 0.5 + 0.5 * std::max(0.0, hit.normal.dot(light));
      const Eigen::Vector3d c = hit.albedo * shade;
      f.color(x, y) = Rgb8(to_byte(c.x()), to_byte(c.y()), to_byte(c.z()));

      for (int d = 0; d < spec.feature_dim; ++d) {
        const double base = d == hit.class_id ? 1.0 : 0.0;
        feature(d) = static_cast<float>(base + spec.feature_noise * gauss(feature_rng));
      }
      if (trained_index[hit.class_id] >= 0) prob(trained_index[hit.class_id]) = 1.0f;
      else prob.setConstant(1.0f / static_cast<float>(n_trained));
    }
  }
  return f;
}

void write_sequence(const SceneSpec& spec, const std::filesystem::path& dir) {
  spec.validate();
  namespace fs = std::filesystem;
  for (const char* sub : {"color", "depth", "labels", "features"}) fs::create_directories(dir / sub);
  const auto poses = spec.poses();
  write_intrinsics(dir / "intrinsics.txt", spec.intrinsics);
  write_poses(dir / "poses.txt", poses);
  write_classes(dir / "classes.txt", spec.classes);
  {
    std::ofstream os(dir / "scene.txt");
    write_scene(os, spec);
  }
  for (int t = 0; t < static_cast<int>(poses.size()); ++t) {
    const SyntheticFrame f = render_synthetic(spec, t);
    const std::string stem = frame_stem(t);
    write_png_rgb(dir / "color" / (stem + ".png"), f.color);
    Image<std::uint16_t> mm(f.depth.width(), f.depth.height());
    for (std::size_t i = 0; i < mm.size(); ++i) {
      mm[i] = static_cast<std::uint16_t>(std::lround(f.depth[i] * 1000.0f));
    }
    write_png_gray16(dir / "depth" / (stem + ".png"), mm);
    write_png_gray8(dir / "labels" / (stem + ".png"), f.labels);
    save_packet(dir / "features" / (stem + ".featpack"), f.packet);
  }
}

}  // namespace opendisc
