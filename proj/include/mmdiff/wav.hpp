// WAV codec, 16-bit PCM only: tensors (channels, samples) in [-1, 1] to
// RIFF files and back. Encoding clamps then rounds; the round trip through
// disk is value-exact on the 16-bit grid.
#pragma once

#include <cmath>

#include "mmdiff/fileio.hpp"
#include "mmdiff/tensor.hpp"

namespace mmdiff {

struct WavData {
  Tensor<double> audio;  // (channels, samples)
  long sample_rate = 0;
};

inline void write_wav(const std::filesystem::path& path,
                      const Tensor<double>& audio, long sample_rate) {
  if (audio.shape.size() != 2)
    throw config_error("write_wav: audio must be (channels, samples)");
  if (sample_rate < 1) throw config_error("write_wav: sample rate must be >= 1");
  const long ch = audio.shape[0], n = audio.shape[1];
  if (ch < 1 || ch > 16) throw config_error("write_wav: unsupported channel count");

  const uint32_t data_size = static_cast<uint32_t>(n * ch * 2);
  Bytes b;
  b.reserve(44 + data_size);
  auto put_tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  put_tag("RIFF");
  detail::put_u32le(b, 36 + data_size);
  put_tag("WAVE");
  put_tag("fmt ");
  detail::put_u32le(b, 16);
  detail::put_u16le(b, 1);  // PCM
  detail::put_u16le(b, static_cast<uint16_t>(ch));
  detail::put_u32le(b, static_cast<uint32_t>(sample_rate));
  detail::put_u32le(b, static_cast<uint32_t>(sample_rate * ch * 2));
  detail::put_u16le(b, static_cast<uint16_t>(ch * 2));
  detail::put_u16le(b, 16);
  put_tag("data");
  detail::put_u32le(b, data_size);
  for (long i = 0; i < n; ++i)
    for (long c = 0; c < ch; ++c) {
      double x = audio.v[c * n + i];
      x = x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x);
      auto s = static_cast<int16_t>(std::lround(x * 32767.0));
      detail::put_u16le(b, static_cast<uint16_t>(s));
    }
  write_file(path, b);
}

inline WavData read_wav(const std::filesystem::path& path) {
  Bytes b = read_file(path);
  detail::ByteReader r(b, "wav " + path.string());
  if (r.tag(4) != "RIFF") throw runtime_fault("not a RIFF file: " + path.string());
  r.u32le();  // riff size; trust chunk walk instead
  if (r.tag(4) != "WAVE") throw runtime_fault("not a WAVE file: " + path.string());

  bool have_fmt = false;
  long ch = 0, sr = 0;
  size_t data_pos = 0, data_len = 0;
  while (r.pos + 8 <= b.size()) {
    std::string id = r.tag(4);
    uint32_t len = r.u32le();
    if (id == "fmt ") {
      detail::ByteReader f(b, r.what);
      f.pos = r.pos;
      if (f.u16le() != 1) throw runtime_fault("wav: only PCM supported");
      ch = f.u16le();
      sr = f.u32le();
      f.u32le();  // byte rate
      f.u16le();  // block align
      if (f.u16le() != 16) throw runtime_fault("wav: only 16-bit supported");
      have_fmt = true;
    } else if (id == "data") {
      data_pos = r.pos;
      data_len = len;
    }
    r.skip(len + (len & 1));  // chunks are word-aligned
  }
  if (!have_fmt || data_pos == 0)
    throw runtime_fault("wav: missing fmt or data chunk: " + path.string());
  if (ch < 1) throw runtime_fault("wav: bad channel count");
  const long frames = static_cast<long>(data_len) / (ch * 2);

  WavData out;
  out.sample_rate = sr;
  out.audio = Tensor<double>({ch, frames});
  detail::ByteReader d(b, r.what);
  d.pos = data_pos;
  for (long i = 0; i < frames; ++i)
    for (long c = 0; c < ch; ++c) {
      auto s = static_cast<int16_t>(d.u16le());
      out.audio.v[c * frames + i] = s / 32767.0;
    }
  return out;
}

}  // namespace mmdiff
