#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "modinv/error.hpp"

// Little-endian primitive readers/writers shared by the SBEB and SBMD
// formats. Byte order is composed explicitly so the formats hold on
// big-endian hosts too.

namespace modinv::binio {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  if (!os) throw_error(ErrorKind::io, "write failed");
}

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(value);
  for (size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
  write_bytes(os, buf, sizeof(T));
}

inline void write_f32le(std::ostream& os, float value) {
  write_le(os, std::bit_cast<uint32_t>(value));
}

inline void read_bytes(std::istream& is, void* p, size_t n,
                       const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    throw_error(ErrorKind::corruption,
                std::string("truncated file while reading ") + what);
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T), what);
  std::make_unsigned_t<T> u = 0;
  for (size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

inline float read_f32le(std::istream& is, const char* what) {
  return std::bit_cast<float>(read_le<uint32_t>(is, what));
}

}  // namespace modinv::binio
