#pragma once

// Little-endian primitives shared by the MLVP and MLVE readers/writers.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mlvat/error.hpp"

namespace mlvat::binio {

template <typename UInt>
UInt to_little(UInt v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    UInt out = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      out = static_cast<UInt>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  }
}

template <typename UInt>
void write_uint(std::ostream& os, UInt v) {
  const UInt le = to_little(v);
  std::array<char, sizeof(UInt)> buf;
  std::memcpy(buf.data(), &le, sizeof(UInt));
  os.write(buf.data(), buf.size());
}

inline void write_f32(std::ostream& os, float v) { write_uint(os, std::bit_cast<std::uint32_t>(v)); }
inline void write_f64(std::ostream& os, double v) { write_uint(os, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::istream& is, std::string context) : is_(is), context_(std::move(context)) {}

  void read_bytes(char* dst, std::size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw Error(Errc::TruncatedFile, context_ + ": unexpected end of file");
    }
  }

  template <typename UInt>
  UInt read_uint() {
    std::array<char, sizeof(UInt)> buf;
    read_bytes(buf.data(), buf.size());
    UInt raw;
    std::memcpy(&raw, buf.data(), sizeof(UInt));
    return to_little(raw);
  }

  float read_f32() { return std::bit_cast<float>(read_uint<std::uint32_t>()); }
  double read_f64() { return std::bit_cast<double>(read_uint<std::uint64_t>()); }

  bool at_eof() { return is_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& is_;
  std::string context_;
};

}  // namespace mlvat::binio
