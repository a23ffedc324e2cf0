#include "opendisc/io.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace opendisc {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; the message is parked here first.
void png_fail(png_structp png, png_const_charp msg) {
  auto* out = static_cast<std::string*>(png_get_error_ptr(png));
  *out = msg;
  png_longjmp(png, 1);
}
void png_warn(png_structp, png_const_charp) {}

struct PngRaw {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<png_byte> bytes;  // row-major, big-endian samples for 16 bit
};

PngRaw read_raw(const fs::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  PngRaw raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error(path.string() + ": " + error);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.bytes.resize(stride * raw.height);
  rows.resize(raw.height);
  for (int y = 0; y < raw.height; ++y) rows[y] = raw.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return raw;
}

void write_raw(const fs::path& path, int width, int height, int color_type, int bit_depth,
               const std::vector<png_byte>& bytes) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot write " + path.string());
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  const std::size_t stride = bytes.size() / static_cast<std::size_t>(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error(path.string() + ": " + error);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) png_write_row(png, bytes.data() + stride * y);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void expect_format(const PngRaw& raw, int channels, int bits, const fs::path& path) {
  if (raw.channels != channels || raw.bit_depth != bits) {
    std::ostringstream os;
    os << path.string() << ": expected " << channels << " channel(s) at " << bits << " bit, found "
       << raw.channels << " at " << raw.bit_depth;
    throw std::runtime_error(os.str());
  }
}

std::ifstream open_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return is;
}

}  // namespace

Image<Rgb8> read_png_rgb(const fs::path& path) {
  const PngRaw raw = read_raw(path);
  expect_format(raw, 3, 8, path);
  Image<Rgb8> img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = Rgb8(raw.bytes[3 * i], raw.bytes[3 * i + 1], raw.bytes[3 * i + 2]);
  }
  return img;
}

Image<std::uint8_t> read_png_gray8(const fs::path& path) {
  const PngRaw raw = read_raw(path);
  expect_format(raw, 1, 8, path);
  Image<std::uint8_t> img(raw.width, raw.height);
  std::copy(raw.bytes.begin(), raw.bytes.end(), img.data());
  return img;
}

Image<std::uint16_t> read_png_gray16(const fs::path& path) {
  const PngRaw raw = read_raw(path);
  expect_format(raw, 1, 16, path);
  Image<std::uint16_t> img(raw.width, raw.height);
  for (std::size_t i = 0; i < img.size(); ++i) {
    img[i] = static_cast<std::uint16_t>((raw.bytes[2 * i] << 8) | raw.bytes[2 * i + 1]);
  }
  return img;
}

void write_png_rgb(const fs::path& path, const Image<Rgb8>& img) {
  std::vector<png_byte> bytes(img.size() * 3);
  for (std::size_t i = 0; i < img.size(); ++i) {
    for (int c = 0; c < 3; ++c) bytes[3 * i + c] = img[i](c);
  }
  write_raw(path, img.width(), img.height(), PNG_COLOR_TYPE_RGB, 8, bytes);
}

void write_png_gray8(const fs::path& path, const Image<std::uint8_t>& img) {
  std::vector<png_byte> bytes(img.data(), img.data() + img.size());
  write_raw(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 8, bytes);
}

void write_png_gray16(const fs::path& path, const Image<std::uint16_t>& img) {
  std::vector<png_byte> bytes(img.size() * 2);
  for (std::size_t i = 0; i < img.size(); ++i) {
    bytes[2 * i] = static_cast<png_byte>(img[i] >> 8);
    bytes[2 * i + 1] = static_cast<png_byte>(img[i] & 0xff);
  }
  write_raw(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 16, bytes);
}

Intrinsics read_intrinsics(const fs::path& path) {
  auto is = open_text(path);
  Intrinsics k;
  if (!(is >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height)) {
    throw std::runtime_error(path.string() + ": expected 'fx fy cx cy width height'");
  }
  k.validate();
  return k;
}

void write_intrinsics(const fs::path& path, const Intrinsics& k) {
  std::ofstream os(path);
  os << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width
     << ' ' << k.height << '\n';
}

std::vector<Pose> read_poses(const fs::path& path) {
  auto is = open_text(path);
  std::vector<Pose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Pose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ls >> p.rotation(r, c);
      ls >> p.translation(r);
    }
    if (!ls) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 12 numbers");
    try {
      p.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    poses.push_back(p);
  }
  return poses;
}

void write_poses(const fs::path& path, const std::vector<Pose>& poses) {
  std::ofstream os(path);
  os << std::setprecision(17);
  for (const Pose& p : poses) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) os << p.rotation(r, c) << ' ';
      os << p.translation(r) << (r == 2 ? '\n' : ' ');
    }
  }
}

int ClassList::trained_count() const {
  return static_cast<int>(std::count(trained.begin(), trained.end(), true));
}

int ClassList::id_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

ClassList read_classes(const fs::path& path) {
  auto is = open_text(path);
  ClassList classes;
  std::string name, kind;
  while (is >> name >> kind) {
    if (kind != "trained" && kind != "novel") {
      throw std::runtime_error(path.string() + ": class kind must be trained or novel, got " + kind);
    }
    classes.names.push_back(name);
    classes.trained.push_back(kind == "trained");
  }
  if (classes.names.empty() || classes.names.size() >= kVoidClass) {
    throw std::runtime_error(path.string() + ": expected between 1 and 254 classes");
  }
  return classes;
}

void write_classes(const fs::path& path, const ClassList& classes) {
  std::ofstream os(path);
  for (int i = 0; i < classes.size(); ++i) {
    os << classes.names[i] << ' ' << (classes.trained[i] ? "trained" : "novel") << '\n';
  }
}

std::string frame_stem(int t) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << t;
  return os.str();
}

Sequence Sequence::open(const fs::path& dir) {
  Sequence s;
  s.dir = dir;
  s.intrinsics = read_intrinsics(dir / "intrinsics.txt");
  s.poses = read_poses(dir / "poses.txt");
  if (s.poses.empty()) throw std::runtime_error(dir.string() + ": poses.txt lists no frames");
  return s;
}

Frame Sequence::load_frame(int t, const NormalSmoothing& smoothing) const {
  const std::string stem = frame_stem(t);
  const Image<Rgb8> rgb = read_png_rgb(dir / "color" / (stem + ".png"));
  const Image<std::uint16_t> mm = read_png_gray16(dir / "depth" / (stem + ".png"));
  Image<float> depth(mm.width(), mm.height());
  for (std::size_t i = 0; i < mm.size(); ++i) depth[i] = static_cast<float>(mm[i]) * 0.001f;
  return make_frame(rgb, std::move(depth), intrinsics, poses.at(t), t, smoothing);
}

fs::path Sequence::label_path(int t) const { return dir / "labels" / (frame_stem(t) + ".png"); }

bool Sequence::has_labels() const { return fs::is_directory(dir / "labels"); }

}  // namespace opendisc
