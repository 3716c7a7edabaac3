#pragma once

// Little-endian primitives shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "berd/errors.hpp"

namespace berd::binary {

template <typename U>
U to_little(U value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(U)];
    std::memcpy(bytes, &value, sizeof(U));
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(bytes[i], bytes[sizeof(U) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(U));
  }
  return value;
}

template <typename U>
void write(std::ostream& out, U value) {
  value = to_little(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

inline void write_string(std::ostream& out, const std::string& s) {
  write<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename U>
void write_array(std::ostream& out, const U* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(U)));
  } else {
    for (std::size_t i = 0; i < count; ++i) write(out, data[i]);
  }
}

template <typename U>
U read(std::istream& in, const char* what) {
  U value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(U))) {
    throw ParseError(std::string("truncated binary container while reading ") + what);
  }
  return to_little(value);
}

inline std::string read_string(std::istream& in, const char* what, std::uint32_t limit = 1u << 26) {
  const auto n = read<std::uint32_t>(in, what);
  if (n > limit) throw ParseError(std::string("implausible string length while reading ") + what);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) {
    throw ParseError(std::string("truncated binary container while reading ") + what);
  }
  return s;
}

template <typename U>
std::vector<U> read_array(std::istream& in, std::size_t count, const char* what) {
  std::vector<U> out(count);
  if (count > 0 &&
      !in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(U)))) {
    throw ParseError(std::string("truncated binary container while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : out) v = to_little(v);
  }
  return out;
}

inline void expect_magic(std::istream& in, const char (&magic)[9], const std::string& source) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
    throw ParseError(source + ": not a " + std::string(magic, 8) + " container");
  }
}

}  // namespace berd::binary
