#pragma once

// Little-endian binary helpers and whole-file reads.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eign/matrix.hpp"

namespace eign {

class IoError : public Error {
 public:
  using Error::Error;
};

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("unexpected end of binary data");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f64_le(std::ostream& os, double v) { write_u64_le(os, std::bit_cast<std::uint64_t>(v)); }

inline double read_f64_le(std::istream& is) { return std::bit_cast<double>(read_u64_le(is)); }

inline std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& p, bool binary = false) {
  std::ifstream is(p, binary ? std::ios::binary : std::ios::in);
  if (!is) throw IoError("cannot read " + p.string());
  return is;
}

inline std::string read_file(const std::filesystem::path& p) {
  auto is = open_in(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace eign
