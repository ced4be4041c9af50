#pragma once

// Little-endian primitive encoding used by the dataset and model files.

#include "gmmest/linalg.hpp"

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace gmmest::binio {

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char buf[sizeof(U)];
  in.read(reinterpret_cast<char*>(buf), sizeof(U));
  if (!in) throw std::runtime_error("unexpected end of binary stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  put_le(out, bits);
}

inline double get_f64(std::istream& in) {
  const auto bits = get_le<std::uint64_t>(in);
  double d;
  std::memcpy(&d, &bits, sizeof d);
  return d;
}

inline void put_cplx(std::ostream& out, cplx z) {
  put_f64(out, z.real());
  put_f64(out, z.imag());
}

inline cplx get_cplx(std::istream& in) {
  const double re = get_f64(in);
  const double im = get_f64(in);
  return {re, im};
}

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& what) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0)
    throw std::runtime_error(what + ": bad magic, expected '" + std::string(magic) + "'");
}

}  // namespace gmmest::binio
