// Feature extractors for evaluation: a seeded random linear projection of
// the flattened (normalized) media, and a handcrafted statistics vector
// (envelope moments and spectral centroid for audio, per-frame intensity
// stats for video, plus their correlation).
#pragma once

#include <memory>
#include <numbers>

#include "mmdiff/config.hpp"
#include "mmdiff/frechet.hpp"
#include "mmdiff/parallel.hpp"
#include "mmdiff/synth.hpp"

namespace mmdiff {

class Extractor {
 public:
  virtual ~Extractor() = default;
  virtual const std::string& id() const = 0;
  virtual int dim() const = 0;
  // Throws config_error if the pair does not fit this extractor.
  virtual void check(const MediaPair& pair) const = 0;
  virtual void extract(const MediaPair& pair, double* out) const = 0;
};

// Fixed seeded N(0,1)/sqrt(fan_in) projection of [video*2-1, audio].
class ProjExtractor : public Extractor {
 public:
  ProjExtractor(Shape video_shape, Shape audio_shape, int d, uint64_t seed)
      : vshape_(std::move(video_shape)),
        ashape_(std::move(audio_shape)),
        d_(d) {
    if (d < 1) throw config_error("proj extractor: dim must be >= 1");
    nv_ = shape_numel(vshape_);
    na_ = shape_numel(ashape_);
    const long nin = nv_ + na_;
    w_.resize(static_cast<size_t>(d) * nin);
    Rng rng(seed);
    rng.fill_normal(w_.data(), static_cast<long>(w_.size()));
    const double s = 1.0 / std::sqrt(static_cast<double>(nin));
    for (auto& x : w_) x *= s;
    id_ = "proj-d" + std::to_string(d) + "-seed" + std::to_string(seed) + "-v" +
          std::to_string(nv_) + "-a" + std::to_string(na_);
  }

  const std::string& id() const override { return id_; }
  int dim() const override { return d_; }

  void check(const MediaPair& pair) const override {
    if (pair.video.shape != vshape_ || pair.audio.shape != ashape_)
      throw config_error("proj extractor: media shape mismatch, got video " +
                         shape_str(pair.video.shape) + " audio " +
                         shape_str(pair.audio.shape));
  }

  void extract(const MediaPair& pair, double* out) const override {
    check(pair);
    const long nin = nv_ + na_;
    for (int r = 0; r < d_; ++r) {
      const double* wr = w_.data() + static_cast<size_t>(r) * nin;
      double acc = 0;
      for (long i = 0; i < nv_; ++i) acc += wr[i] * (2.0 * pair.video.v[i] - 1.0);
      for (long i = 0; i < na_; ++i) acc += wr[nv_ + i] * pair.audio.v[i];
      out[r] = acc;
    }
  }

 private:
  Shape vshape_, ashape_;
  int d_;
  long nv_ = 0, na_ = 0;
  std::vector<double> w_;
  std::string id_;
};

// Twelve handcrafted statistics; works on any well-formed pair.
class StatsExtractor : public Extractor {
 public:
  StatsExtractor() : id_("stats-v1") {}

  const std::string& id() const override { return id_; }
  int dim() const override { return 12; }

  void check(const MediaPair& pair) const override { pair.check_durations(); }

  void extract(const MediaPair& pair, double* out) const override {
    check(pair);
    auto [vid, rms] = envelope_traces(pair);
    auto stats4 = [](const std::vector<double>& x, double* o) {
      double mn = x[0], mx = x[0], s = 0, s2 = 0;
      for (double v : x) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        s += v;
        s2 += v * v;
      }
      double mean = s / x.size();
      double var = s2 / x.size() - mean * mean;
      o[0] = mean;
      o[1] = std::sqrt(var < 0 ? 0 : var);
      o[2] = mn;
      o[3] = mx;
    };
    stats4(vid, out + 0);
    out[4] = spatial_std(pair.video);
    stats4(rms, out + 5);
    out[9] = global_std(pair.audio.v);
    out[10] = spectral_centroid(pair.audio);
    out[11] = pearson(vid, rms);
  }

 private:
  static double global_std(const std::vector<double>& x) {
    double s = 0, s2 = 0;
    for (double v : x) {
      s += v;
      s2 += v * v;
    }
    double mean = s / x.size();
    double var = s2 / x.size() - mean * mean;
    return std::sqrt(var < 0 ? 0 : var);
  }

  // Mean over frames of the per-frame pixel standard deviation.
  static double spatial_std(const Tensor<double>& video) {
    const long F = video.shape[0], n = video.numel() / F;
    double acc = 0;
    for (long k = 0; k < F; ++k) {
      double s = 0, s2 = 0;
      const double* p = video.v.data() + k * n;
      for (long i = 0; i < n; ++i) {
        s += p[i];
        s2 += p[i] * p[i];
      }
      double mean = s / n;
      double var = s2 / n - mean * mean;
      acc += std::sqrt(var < 0 ? 0 : var);
    }
    return acc / F;
  }

  // Magnitude-weighted mean DFT bin of channel 0, normalized to Nyquist.
  static double spectral_centroid(const Tensor<double>& audio) {
    const long n = audio.shape[1];
    const double* x = audio.v.data();
    double num = 0, den = 0;
    for (long k = 1; k <= n / 2; ++k) {
      double re = 0, im = 0;
      const double w = 2.0 * std::numbers::pi * k / n;
      for (long i = 0; i < n; ++i) {
        re += x[i] * std::cos(w * i);
        im -= x[i] * std::sin(w * i);
      }
      double mag = std::sqrt(re * re + im * im);
      num += k * mag;
      den += mag;
    }
    return den < 1e-12 ? 0.0 : num / den / (n / 2.0);
  }

  std::string id_;
};

inline FeatureSet extract_features(const std::vector<MediaPair>& pairs,
                                   const Extractor& ex) {
  if (pairs.empty()) throw config_error("extract_features: empty input");
  for (const auto& p : pairs) {
    ex.check(p);
    if (p.video.shape != pairs[0].video.shape ||
        p.audio.shape != pairs[0].audio.shape)
      throw config_error("extract_features: media shapes vary across the set");
  }
  FeatureSet out;
  out.extractor_id = ex.id();
  out.features.resize(static_cast<long>(pairs.size()), ex.dim());
  parallel_for(static_cast<long>(pairs.size()), [&](long b, long e) {
    std::vector<double> row(ex.dim());
    for (long i = b; i < e; ++i) {
      ex.extract(pairs[i], row.data());
      for (int j = 0; j < ex.dim(); ++j) out.features(i, j) = row[j];
    }
  });
  return out;
}

// Fixed projection seed so eval runs are comparable across processes.
inline constexpr uint64_t kProjSeed = 1905;

inline std::unique_ptr<Extractor> make_extractor(const EvalConfig& cfg,
                                                 Shape video_shape,
                                                 Shape audio_shape) {
  cfg.validate();
  if (cfg.extractor == "proj")
    return std::make_unique<ProjExtractor>(std::move(video_shape),
                                           std::move(audio_shape), cfg.proj_dim,
                                           kProjSeed);
  return std::make_unique<StatsExtractor>();
}

inline std::unique_ptr<Extractor> make_extractor(const EvalConfig& cfg,
                                                 const ModelConfig& shape) {
  return make_extractor(cfg, shape.video_shape(), shape.audio_shape());
}

}  // namespace mmdiff
