#include "opendisc/feature_packet.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace opendisc {

namespace {

std::uint32_t read_u32_le(const unsigned char* b) {
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void read_f32_le(std::istream& is, std::vector<float>& out, std::size_t count) {
  out.resize(count);
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * 4));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : out) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      u = __builtin_bswap32(u);
      std::memcpy(&v, &u, 4);
    }
  }
}

void write_f32_le(std::ostream& os, const std::vector<float>& in) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(in.data()), static_cast<std::streamsize>(in.size() * 4));
  } else {
    for (float v : in) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      write_u32_le(os, u);
    }
  }
}

std::string frame_message(int frame, const std::string& what) {
  std::ostringstream os;
  os << "feature packet for frame " << frame << ": " << what;
  return os.str();
}

}  // namespace

PacketError::PacketError(int frame, const std::string& what)
    : std::runtime_error(frame_message(frame, what)), frame_(frame) {}

FeaturePacket FeaturePacket::zeros(int width, int height, int feature_dim, int class_count) {
  FeaturePacket p;
  p.width = width;
  p.height = height;
  p.feature_dim = feature_dim;
  p.class_count = class_count;
  p.features.assign(p.pixel_count() * feature_dim, 0.0f);
  p.probabilities.assign(p.pixel_count() * class_count, 0.0f);
  return p;
}

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "required") return FeatureMode::kRequired;
  if (s == "optional") return FeatureMode::kOptional;
  if (s == "off") return FeatureMode::kOff;
  throw std::invalid_argument("feature mode must be required|optional|off, got '" + s + "'");
}

std::string to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::kRequired: return "required";
    case FeatureMode::kOptional: return "optional";
    case FeatureMode::kOff: return "off";
  }
  return "?";
}

FeaturePacket load_packet(const std::filesystem::path& path, int t) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw PacketError(t, "cannot open " + path.string());
  std::array<unsigned char, 20> header{};
  is.read(reinterpret_cast<char*>(header.data()), header.size());
  if (!is || std::memcmp(header.data(), kPacketMagic, 4) != 0) {
    throw PacketError(t, "bad header (expected FPK1)");
  }
  FeaturePacket p;
  p.height = static_cast<int>(read_u32_le(header.data() + 4));
  p.width = static_cast<int>(read_u32_le(header.data() + 8));
  p.feature_dim = static_cast<int>(read_u32_le(header.data() + 12));
  p.class_count = static_cast<int>(read_u32_le(header.data() + 16));
  if (p.width <= 0 || p.height <= 0 || p.feature_dim <= 0 || p.class_count <= 0 ||
      p.pixel_count() > (std::size_t{1} << 26)) {
    throw PacketError(t, "implausible shape in header");
  }
  read_f32_le(is, p.features, p.pixel_count() * p.feature_dim);
  read_f32_le(is, p.probabilities, p.pixel_count() * p.class_count);
  if (!is) throw PacketError(t, "truncated payload");
  is.peek();
  if (!is.eof()) throw PacketError(t, "trailing bytes after payload");

  for (float v : p.features) {
    if (!std::isfinite(v)) throw PacketError(t, "non-finite feature value");
  }
  for (std::size_t i = 0; i < p.pixel_count(); ++i) {
    auto row = p.probability(i);
    if (!row.allFinite() || (row.array() < 0.0f).any()) {
      throw PacketError(t, "invalid probability at pixel " + std::to_string(i));
    }
    const double sum = row.cast<double>().sum();
    if (std::abs(sum - 1.0) > 1e-3) {
      throw PacketError(t, "probabilities at pixel " + std::to_string(i) + " sum to " +
                               std::to_string(sum));
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      row /= static_cast<float>(sum);
      ++p.renormalized_pixels;
    }
  }
  return p;
}

void save_packet(const std::filesystem::path& path, const FeaturePacket& p) {
  if (p.features.size() != p.pixel_count() * p.feature_dim ||
      p.probabilities.size() != p.pixel_count() * p.class_count) {
    throw std::invalid_argument("save_packet: payload size does not match shape");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kPacketMagic, 4);
  write_u32_le(os, static_cast<std::uint32_t>(p.height));
  write_u32_le(os, static_cast<std::uint32_t>(p.width));
  write_u32_le(os, static_cast<std::uint32_t>(p.feature_dim));
  write_u32_le(os, static_cast<std::uint32_t>(p.class_count));
  write_f32_le(os, p.features);
  write_f32_le(os, p.probabilities);
}

std::optional<FeaturePacket> load_frame_packet(const std::filesystem::path& sequence_dir, int t,
                                               FeatureMode mode) {
  if (mode == FeatureMode::kOff) return std::nullopt;
  std::ostringstream name;
  name << std::setw(6) << std::setfill('0') << t << ".featpack";
  const auto path = sequence_dir / "features" / name.str();
  if (!std::filesystem::exists(path)) {
    if (mode == FeatureMode::kOptional) return std::nullopt;
    throw PacketError(t, "missing " + path.string());
  }
  return load_packet(path, t);
}

Image<float> compute_entropy(const FeaturePacket& packet) {
  Image<float> out(packet.width, packet.height, 0.0f);
  for (std::size_t i = 0; i < packet.pixel_count(); ++i) {
    out[i] = shannon_entropy(packet.probability(i));
  }
  return out;
}

}  // namespace opendisc
