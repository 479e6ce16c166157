// PNG codec over zlib: 8-bit grayscale or RGB, tensors (C, H, W) in [0, 1].
// Writing always uses filter 0; reading supports filters 0-4 and verifies
// chunk CRCs. Values round-trip exactly on the 8-bit grid.
#pragma once

#include <zlib.h>

#include <cmath>

#include "mmdiff/fileio.hpp"
#include "mmdiff/tensor.hpp"

namespace mmdiff {

namespace detail {

inline const unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

inline void put_chunk(Bytes& b, const char* type, const Bytes& data) {
  put_u32be(b, static_cast<uint32_t>(data.size()));
  size_t crc_start = b.size();
  b.insert(b.end(), type, type + 4);
  b.insert(b.end(), data.begin(), data.end());
  uLong crc = crc32(0L, b.data() + crc_start, static_cast<uInt>(4 + data.size()));
  put_u32be(b, static_cast<uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const Tensor<double>& img) {
  if (img.shape.size() != 3) throw config_error("write_png: image must be (C, H, W)");
  const long C = img.shape[0], H = img.shape[1], W = img.shape[2];
  if (C != 1 && C != 3) throw config_error("write_png: 1 or 3 channels only");
  if (H < 1 || W < 1) throw config_error("write_png: empty image");

  // Raw scanlines: filter byte 0, then channel-interleaved pixels.
  const long row_bytes = W * C;
  Bytes raw;
  raw.reserve(static_cast<size_t>(H * (1 + row_bytes)));
  for (long y = 0; y < H; ++y) {
    raw.push_back(0);
    for (long x = 0; x < W; ++x)
      for (long c = 0; c < C; ++c) {
        double v = img.v[(c * H + y) * W + x];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        raw.push_back(static_cast<unsigned char>(std::lround(v * 255.0)));
      }
  }
  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  Bytes comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw runtime_fault("png: deflate failed");
  comp.resize(comp_len);

  Bytes ihdr;
  detail::put_u32be(ihdr, static_cast<uint32_t>(W));
  detail::put_u32be(ihdr, static_cast<uint32_t>(H));
  ihdr.push_back(8);                         // bit depth
  ihdr.push_back(C == 3 ? 2 : 0);            // color type
  ihdr.push_back(0);                         // compression
  ihdr.push_back(0);                         // filter method
  ihdr.push_back(0);                         // no interlace

  Bytes b(detail::kPngSig, detail::kPngSig + 8);
  detail::put_chunk(b, "IHDR", ihdr);
  detail::put_chunk(b, "IDAT", comp);
  detail::put_chunk(b, "IEND", {});
  write_file(path, b);
}

inline Tensor<double> read_png(const std::filesystem::path& path) {
  Bytes b = read_file(path);
  const std::string what = "png " + path.string();
  if (b.size() < 8 || !std::equal(detail::kPngSig, detail::kPngSig + 8, b.begin()))
    throw runtime_fault(what + ": bad signature");

  detail::ByteReader r(b, what);
  r.pos = 8;
  long W = 0, H = 0, C = 0;
  Bytes comp;
  bool saw_ihdr = false, saw_iend = false;
  while (!saw_iend) {
    uint32_t len = r.u32be();
    std::string type = r.tag(4);
    r.need(len + 4);
    size_t data_pos = r.pos;
    uLong crc = crc32(0L, b.data() + data_pos - 4, static_cast<uInt>(4 + len));
    r.skip(len);
    if (r.u32be() != crc) throw runtime_fault(what + ": chunk crc mismatch");

    if (type == "IHDR") {
      detail::ByteReader h(b, what);
      h.pos = data_pos;
      W = h.u32be();
      H = h.u32be();
      int depth = h.u8(), color = h.u8();
      int compm = h.u8(), filtm = h.u8(), inter = h.u8();
      if (depth != 8 || (color != 0 && color != 2) || compm != 0 || filtm != 0 ||
          inter != 0)
        throw runtime_fault(what + ": unsupported format");
      C = color == 2 ? 3 : 1;
      saw_ihdr = true;
    } else if (type == "IDAT") {
      comp.insert(comp.end(), b.begin() + data_pos, b.begin() + data_pos + len);
    } else if (type == "IEND") {
      saw_iend = true;
    }
  }
  if (!saw_ihdr || comp.empty()) throw runtime_fault(what + ": missing chunks");
  if (W < 1 || H < 1) throw runtime_fault(what + ": empty image");

  const long row_bytes = W * C, bpp = C;
  Bytes raw(static_cast<size_t>(H * (1 + row_bytes)));
  uLongf raw_len = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_len, comp.data(),
                 static_cast<uLong>(comp.size())) != Z_OK ||
      raw_len != raw.size())
    throw runtime_fault(what + ": inflate failed");

  // Defilter in place into a recon buffer, then deinterleave.
  Bytes recon(static_cast<size_t>(H * row_bytes));
  for (long y = 0; y < H; ++y) {
    const unsigned char* src = raw.data() + y * (1 + row_bytes);
    unsigned char* cur = recon.data() + y * row_bytes;
    const unsigned char* up = y > 0 ? recon.data() + (y - 1) * row_bytes : nullptr;
    int f = src[0];
    for (long i = 0; i < row_bytes; ++i) {
      int x = src[1 + i];
      int a = i >= bpp ? cur[i - bpp] : 0;
      int u = up ? up[i] : 0;
      int c = (up && i >= bpp) ? up[i - bpp] : 0;
      int v;
      switch (f) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + u; break;
        case 3: v = x + (a + u) / 2; break;
        case 4: v = x + detail::paeth(a, u, c); break;
        default: throw runtime_fault(what + ": unknown filter");
      }
      cur[i] = static_cast<unsigned char>(v & 0xff);
    }
  }

  Tensor<double> out({C, H, W});
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x)
      for (long c = 0; c < C; ++c)
        out.v[(c * H + y) * W + x] = recon[y * row_bytes + x * C + c] / 255.0;
  return out;
}

}  // namespace mmdiff
