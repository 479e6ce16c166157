// Whole-file binary I/O and endian-explicit integer packing shared by the
// media codecs and the checkpoint archive.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmdiff/core.hpp"

namespace mmdiff {

using Bytes = std::vector<unsigned char>;

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw runtime_fault("cannot open for reading: " + path.string());
  Bytes out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw runtime_fault("read failed: " + path.string());
  return out;
}

inline void write_file(const std::filesystem::path& path, const Bytes& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw runtime_fault("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!f) throw runtime_fault("write failed: " + path.string());
}

namespace detail {

inline void put_u16le(Bytes& b, uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

inline void put_u32le(Bytes& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

inline void put_u64le(Bytes& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

inline void put_u32be(Bytes& b, uint32_t v) {
  for (int i = 3; i >= 0; --i) b.push_back((v >> (8 * i)) & 0xff);
}

// Bounds-checked cursor over a byte buffer.
struct ByteReader {
  const Bytes& b;
  size_t pos = 0;
  std::string what;

  ByteReader(const Bytes& buf, std::string label) : b(buf), what(std::move(label)) {}

  void need(size_t n) const {
    // n is checked first so a corrupt length field cannot overflow pos + n.
    if (n > b.size() || pos + n > b.size())
      throw runtime_fault(what + ": truncated");
  }
  uint8_t u8() {
    need(1);
    return b[pos++];
  }
  uint16_t u16le() {
    need(2);
    uint16_t v = b[pos] | (uint16_t(b[pos + 1]) << 8);
    pos += 2;
    return v;
  }
  uint32_t u32le() {
    need(4);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[pos + i];
    pos += 4;
    return v;
  }
  uint64_t u64le() {
    need(8);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[pos + i];
    pos += 8;
    return v;
  }
  uint32_t u32be() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b[pos + i];
    pos += 4;
    return v;
  }
  std::string tag(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b.data()) + pos, n);
    pos += n;
    return s;
  }
  void skip(size_t n) {
    need(n);
    pos += n;
  }
};

}  // namespace detail
}  // namespace mmdiff
