#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

// Little-endian helpers for the checkpoint formats.
namespace opendisc::binio {

template <typename T>
void put(std::ostream& os, T value) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  static_assert(std::is_arithmetic_v<T>);
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!is) throw std::runtime_error("unexpected end of binary stream");
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  T value;
  std::memcpy(&value, b, sizeof(T));
  return value;
}

template <typename T>
void put_span(std::ostream& os, const T* data, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) put<T>(os, data[i]);
}

template <typename T>
void get_span(std::istream& is, T* data, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) data[i] = get<T>(is);
}

inline void expect_magic(std::istream& is, const char (&magic)[4], const std::filesystem::path& path) {
  char m[4] = {};
  is.read(m, 4);
  if (!is || std::memcmp(m, magic, 4) != 0) {
    throw std::runtime_error(path.string() + ": not a " + std::string(magic, 4) + " file");
  }
}

}  // namespace opendisc::binio
