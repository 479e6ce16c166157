// MediaPair: one video clip plus one audio waveform with rate metadata.
// Raw media convention: video intensities in [0,1], audio in [-1,1].
// Models operate on normalized tensors (both modalities in [-1,1]).
#pragma once

#include <algorithm>

#include "mmdiff/core.hpp"
#include "mmdiff/tensor.hpp"

namespace mmdiff {

struct MediaPair {
  Tensor<double> video;  // (F, C, H, W), values in [0, 1]
  Tensor<double> audio;  // (C_a, T_a), values in [-1, 1]
  double fps = 0;
  double sr = 0;

  long frames() const { return video.shape.empty() ? 0 : video.shape[0]; }
  long audio_len() const { return audio.shape.size() < 2 ? 0 : audio.shape[1]; }

  double video_seconds() const { return fps > 0 ? frames() / fps : 0; }
  double audio_seconds() const { return sr > 0 ? audio_len() / sr : 0; }

  void check_durations() const {
    if (video.shape.size() != 4 || audio.shape.size() != 2)
      throw config_error("media pair: expected video (F,C,H,W) and audio (C_a,T_a)");
    if (fps <= 0 || sr <= 0) throw config_error("media pair: rates must be positive");
    double dv = video_seconds(), da = audio_seconds();
    if (std::abs(dv - da) > 1e-9)
      throw config_error("media pair: video and audio durations differ");
  }
};

// [0,1] pixels -> [-1,1] model range.
template <class S>
Tensor<S> normalize_video(const Tensor<double>& v) {
  Tensor<S> out(v.shape);
  for (long i = 0; i < v.numel(); ++i)
    out.v[i] = static_cast<S>(2.0 * v.v[i] - 1.0);
  return out;
}

template <class S>
Tensor<S> normalize_audio(const Tensor<double>& a) {
  return a.template cast<S>();
}

// Model range back to media range, clamped to valid bounds.
template <class S>
Tensor<double> denormalize_video(const Tensor<S>& v) {
  Tensor<double> out(v.shape);
  for (long i = 0; i < v.numel(); ++i)
    out.v[i] = std::clamp((static_cast<double>(v.v[i]) + 1.0) / 2.0, 0.0, 1.0);
  return out;
}

template <class S>
Tensor<double> denormalize_audio(const Tensor<S>& a) {
  Tensor<double> out(a.shape);
  for (long i = 0; i < a.numel(); ++i)
    out.v[i] = std::clamp(static_cast<double>(a.v[i]), -1.0, 1.0);
  return out;
}

}  // namespace mmdiff
