#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "dhcn/common.hpp"

// Little-endian primitives shared by the dataset and checkpoint writers.
// Explicit byte packing keeps the files portable regardless of host order.

namespace dhcn::io {

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_i64(std::ostream& os, std::int64_t v) {
  write_u64(os, static_cast<std::uint64_t>(v));
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t read_u8(std::istream& is, const std::string& path) {
  int c = is.get();
  if (c == EOF) throw IoError("unexpected end of file: " + path);
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& is, const std::string& path) {
  char b[4];
  if (!is.read(b, 4)) throw IoError("unexpected end of file: " + path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const std::string& path) {
  char b[8];
  if (!is.read(b, 8)) throw IoError("unexpected end of file: " + path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::int64_t read_i64(std::istream& is, const std::string& path) {
  return static_cast<std::int64_t>(read_u64(is, path));
}

inline double read_f64(std::istream& is, const std::string& path) {
  std::uint64_t bits = read_u64(is, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::string read_string(std::istream& is, const std::string& path) {
  std::uint32_t n = read_u32(is, path);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw IoError("unexpected end of file: " + path);
  return s;
}

inline void expect_magic(std::istream& is, const std::string& magic, const std::string& path) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic)
    throw IoError(path + ": bad magic, expected " + magic);
}

}  // namespace dhcn::io
