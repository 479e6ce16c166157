// On-disk media layout: one directory per sample holding numbered PNG
// frames, a PCM16 WAV, and a key=value manifest; datasets are directories
// of such samples plus a top-level manifest. Multi-file writes go through
// a temp directory and a final rename so partial output never lands.
#pragma once

#include <algorithm>
#include <cstdio>
#include <map>

#include "mmdiff/config.hpp"
#include "mmdiff/media.hpp"
#include "mmdiff/png.hpp"
#include "mmdiff/wav.hpp"

namespace mmdiff {

using KvList = std::vector<std::pair<std::string, std::string>>;

inline std::string sample_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05d", index);
  return buf;
}

inline std::string frame_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03d.png", index);
  return buf;
}

inline void write_manifest(const std::filesystem::path& path, const KvList& kv) {
  std::string text;
  for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
  Bytes b(text.begin(), text.end());
  write_file(path, b);
}

inline std::map<std::string, std::string> read_manifest(
    const std::filesystem::path& path) {
  Bytes b = read_file(path);
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : parse_kv_text(std::string(b.begin(), b.end())))
    out[k] = v;
  return out;
}

inline double manifest_double(const std::map<std::string, std::string>& m,
                              const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw runtime_fault("manifest: missing key " + key);
  return detail::parse_double(it->second, key);
}

// Creates `out` in one shot: `fill` populates a temp sibling, which is then
// renamed into place. Refuses to overwrite an existing path.
template <class Fn>
void write_dir_atomic(const std::filesystem::path& out, Fn&& fill) {
  namespace fs = std::filesystem;
  if (fs::exists(out))
    throw runtime_fault("output already exists: " + out.string());
  fs::path tmp = out;
  tmp += ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  fill(tmp);
  fs::rename(tmp, out);
}

// Writes the media files plus manifest into an existing directory.
inline void write_media_files(const std::filesystem::path& dir, const MediaPair& pair,
                              const KvList& extra = {}) {
  pair.check_durations();
  const long F = pair.frames();
  const long C = pair.video.shape[1], H = pair.video.shape[2], W = pair.video.shape[3];
  for (long k = 0; k < F; ++k) {
    Tensor<double> frame({C, H, W});
    const long n = C * H * W;
    std::copy_n(pair.video.v.begin() + k * n, n, frame.v.begin());
    write_png(dir / frame_file_name(static_cast<int>(k)), frame);
  }
  write_wav(dir / "audio.wav", pair.audio, std::lround(pair.sr));
  KvList kv = {{"fps", detail::fmt_double(pair.fps)},
               {"sample_rate", detail::fmt_double(pair.sr)},
               {"frames", std::to_string(F)},
               {"audio_len", std::to_string(pair.audio_len())}};
  kv.insert(kv.end(), extra.begin(), extra.end());
  write_manifest(dir / "manifest.txt", kv);
}

inline void write_media_dir(const std::filesystem::path& dir, const MediaPair& pair,
                            const KvList& extra = {}) {
  write_dir_atomic(dir, [&](const std::filesystem::path& tmp) {
    write_media_files(tmp, pair, extra);
  });
}

inline MediaPair read_media_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  auto manifest = read_manifest(dir / "manifest.txt");
  MediaPair out;
  out.fps = manifest_double(manifest, "fps");
  out.sr = manifest_double(manifest, "sample_rate");

  std::vector<fs::path> frames;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && name.size() > 4 &&
        name.substr(name.size() - 4) == ".png")
      frames.push_back(e.path());
  }
  if (frames.empty()) throw runtime_fault("no frames in " + dir.string());
  std::sort(frames.begin(), frames.end());

  Tensor<double> first = read_png(frames[0]);
  const long C = first.shape[0], H = first.shape[1], W = first.shape[2];
  out.video = Tensor<double>({static_cast<long>(frames.size()), C, H, W});
  const long n = C * H * W;
  std::copy(first.v.begin(), first.v.end(), out.video.v.begin());
  for (size_t k = 1; k < frames.size(); ++k) {
    Tensor<double> fr = read_png(frames[k]);
    if (fr.shape != first.shape)
      throw runtime_fault("frame shape varies in " + dir.string());
    std::copy(fr.v.begin(), fr.v.end(), out.video.v.begin() + k * n);
  }

  WavData wav = read_wav(dir / "audio.wav");
  if (wav.sample_rate != std::lround(out.sr))
    throw runtime_fault("wav sample rate disagrees with manifest in " + dir.string());
  out.audio = std::move(wav.audio);
  out.check_durations();
  return out;
}

inline std::vector<std::filesystem::path> list_sample_dirs(
    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw runtime_fault("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && e.path().filename().string().rfind("sample_", 0) == 0)
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// One atomic write of count samples plus the dataset manifest. `per_sample`
// supplies manifest extras for each index (may return an empty list).
template <class PerSample>
void write_dataset_dir(const std::filesystem::path& out,
                       const std::vector<MediaPair>& pairs, const KvList& dataset_kv,
                       PerSample&& per_sample) {
  write_dir_atomic(out, [&](const std::filesystem::path& tmp) {
    for (size_t i = 0; i < pairs.size(); ++i) {
      std::filesystem::path sd = tmp / sample_dir_name(static_cast<int>(i));
      std::filesystem::create_directories(sd);
      write_media_files(sd, pairs[i], per_sample(static_cast<int>(i)));
    }
    KvList kv = {{"count", std::to_string(pairs.size())}};
    kv.insert(kv.end(), dataset_kv.begin(), dataset_kv.end());
    write_manifest(tmp / "manifest.txt", kv);
  });
}

inline std::vector<MediaPair> read_dataset_dir(const std::filesystem::path& dir) {
  std::vector<MediaPair> out;
  for (const auto& sd : list_sample_dirs(dir)) out.push_back(read_media_dir(sd));
  if (out.empty()) throw runtime_fault("no samples under " + dir.string());
  return out;
}

}  // namespace mmdiff
