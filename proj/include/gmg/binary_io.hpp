#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gmg/errors.hpp"

namespace gmg::io {

/// Little-endian primitive writer/reader shared by the sequence and checkpoint formats.
template <class U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  std::memcpy(b, &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

inline void put_f32_array(std::ostream& os, const float* data, std::size_t n) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < n; ++i) put_le(os, data[i]);
  }
}

class Reader {
 public:
  Reader(std::istream& is, std::string what) : is_(is), what_(std::move(what)) {}

  void bytes(void* dst, std::size_t n, const char* field) {
    if (!is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n)))
      throw TruncationError(what_ + ": file ends inside " + field);
  }

  template <class U>
  U le(const char* field) {
    unsigned char b[sizeof(U)];
    bytes(b, sizeof(U), field);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(U));
    U v;
    std::memcpy(&v, b, sizeof(U));
    return v;
  }

  void f32_array(float* dst, std::size_t n, const char* field) {
    bytes(dst, n * sizeof(float), field);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < n; ++i) {
        auto* b = reinterpret_cast<unsigned char*>(dst + i);
        std::reverse(b, b + sizeof(float));
      }
    }
  }

  std::string string(std::size_t n, const char* field) {
    std::string s(n, '\0');
    if (n) bytes(s.data(), n, field);
    return s;
  }

  /// Bytes left in the stream, without consuming them.
  std::uint64_t remaining() {
    const auto here = is_.tellg();
    is_.seekg(0, std::ios::end);
    const auto end = is_.tellg();
    is_.seekg(here);
    return static_cast<std::uint64_t>(end - here);
  }

  const std::string& what() const { return what_; }

 private:
  std::istream& is_;
  std::string what_;
};

}  // namespace gmg::io
