// Synthetic pair generator: envelope construction, the alignment metric,
// and the matched-vs-shuffled separation it must deliver.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmdiff/synth.hpp"

using namespace mmdiff;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
SynthParams desk_params() {
  SynthParams p;  // defaults match the desk geometry
  p.blob_freq = 1.0;
  p.tone_freq = 120.0;
  return p;
}
}  // namespace

TEST_CASE("parameter validation", "[synth]") {
  SynthParams p = desk_params();
  REQUIRE_NOTHROW(p.validate());
  p.blob_freq = 4.0;  // fps/2
  CHECK_THROWS_AS(p.validate(), config_error);
  p = desk_params();
  p.tone_freq = 512.0;  // sr/2
  CHECK_THROWS_AS(p.validate(), config_error);
  p = desk_params();
  p.audio_len = 1000;  // duration mismatch
  CHECK_THROWS_AS(p.validate(), config_error);
  p = desk_params();
  p.blob_color = {0.5, 1.2, 0.5};
  CHECK_THROWS_AS(p.validate(), config_error);
  p = desk_params();
  p.frames = 0;
  CHECK_THROWS_AS(p.validate(), config_error);
}

TEST_CASE("generated media obey ranges and determinism", "[synth]") {
  SynthParams p = desk_params();
  p.phase = 0.7;
  MediaPair a = make_pair(p);
  MediaPair b = make_pair(p);
  REQUIRE(a.video.v == b.video.v);
  REQUIRE(a.audio.v == b.audio.v);
  REQUIRE(a.video.shape == Shape{8, 3, 16, 16});
  REQUIRE(a.audio.shape == Shape{1, 1024});
  REQUIRE_NOTHROW(a.check_durations());
  for (double x : a.video.v) CHECK((x >= 0.0 && x <= 1.0));
  for (double x : a.audio.v) CHECK((x >= -1.0 && x <= 1.0));

  // Peak pixel sits at the image center and carries the envelope.
  double env0 = 0.5 * (1.0 + std::sin(p.phase));
  long center = ((0L * 3 + 0) * 16 + 7) * 16 + 7;  // frame 0, channel 0, (7,7)
  double cpix = a.video.v[center];
  CHECK(cpix <= env0 + 1e-12);
  CHECK(cpix > 0.9 * env0);  // center is within half a pixel of the blob mean
  for (long i = 0; i < 3 * 16 * 16; ++i) CHECK(a.video.v[i] <= cpix + 1e-12);
}

TEST_CASE("zero pulse frequency degenerates to constant envelopes", "[synth]") {
  SynthParams p = desk_params();
  p.blob_freq = 0.0;
  p.phase = std::numbers::pi / 2;  // envelope = 1
  MediaPair pair = make_pair(p);
  for (int k = 0; k < p.frames; ++k) {
    long stride = static_cast<long>(p.channels) * p.height * p.width;
    for (long i = 0; i < stride; ++i)
      CHECK(pair.video.v[k * stride + i] == pair.video.v[i]);
  }
  // Constant video trace -> alignment is 0 by convention.
  CHECK(alignment_score(pair) == 0.0);
}

TEST_CASE("opposite phases negate the intensity trace", "[synth]") {
  SynthParams p = desk_params();
  p.blob_freq = 0.75;
  SynthParams q = p;
  q.phase = p.phase + std::numbers::pi;
  MediaPair a = make_pair(p), b = make_pair(q);
  auto [va, ra] = envelope_traces(a);
  auto [vb, rb] = envelope_traces(b);
  // Envelopes are 0.5*(1 +/- s): traces mirror about the shared mean level,
  // so the sum is the same constant at every frame.
  for (size_t k = 1; k < va.size(); ++k)
    CHECK_THAT(va[k] + vb[k], WithinRel(va[0] + vb[0], 1e-9));
}

TEST_CASE("alignment of generated pairs matches the frozen table", "[synth]") {
  // Frozen from an independent trace computation (F=8, fps=8): worst-case
  // score over 17 phases at blob_freq 0.5 is 0.905, at 1.0 it is 0.924.
  auto min_score = [](double fb) {
    double mn = 1.0;
    for (int i = 0; i <= 16; ++i) {
      SynthParams p = desk_params();
      p.blob_freq = fb;
      p.phase = 2.0 * std::numbers::pi * i / 16.0;
      mn = std::min(mn, alignment_score(make_pair(p)));
    }
    return mn;
  };
  CHECK_THAT(min_score(0.5), WithinAbs(0.905, 0.005));
  CHECK_THAT(min_score(1.0), WithinAbs(0.924, 0.005));
  CHECK(min_score(0.5) > 0.9);
  CHECK(min_score(1.0) > 0.9);
}

TEST_CASE("antiphase pairing scores strongly negative", "[synth]") {
  SynthParams p = desk_params();
  MediaPair matched = make_pair(p);
  SynthParams q = p;
  q.phase = std::numbers::pi;
  MediaPair shifted = make_pair(q);
  MediaPair cross;
  cross.video = matched.video;
  cross.audio = shifted.audio;
  cross.fps = matched.fps;
  cross.sr = matched.sr;
  // Frozen oracle value: -0.9239.
  CHECK_THAT(alignment_score(cross), WithinAbs(-0.9239, 0.005));
}

TEST_CASE("silent audio scores zero", "[synth]") {
  SynthParams p = desk_params();
  MediaPair pair = make_pair(p);
  std::fill(pair.audio.v.begin(), pair.audio.v.end(), 0.0);
  CHECK(alignment_score(pair) == 0.0);
  // Constant non-zero audio has a constant RMS trace too.
  std::fill(pair.audio.v.begin(), pair.audio.v.end(), 0.25);
  CHECK(alignment_score(pair) == 0.0);
}

TEST_CASE("alignment rejects malformed pairs", "[synth]") {
  MediaPair empty;
  CHECK_THROWS_AS(alignment_score(empty), config_error);
  SynthParams p = desk_params();
  MediaPair pair = make_pair(p);
  pair.sr = 999.0;  // duration mismatch
  CHECK_THROWS_AS(alignment_score(pair), config_error);
}

TEST_CASE("datasets are seeded-reproducible with aligned pairs", "[synth]") {
  ModelConfig mc = ModelConfig::desk();
  DataConfig dc;
  Rng r1(5), r2(5), r3(6);
  auto d1 = make_dataset(40, mc, dc, r1);
  auto d2 = make_dataset(40, mc, dc, r2);
  auto d3 = make_dataset(40, mc, dc, r3);
  REQUIRE(d1.size() == 40);
  bool all_same = true, any_diff = false;
  double mean = 0;
  for (size_t i = 0; i < d1.size(); ++i) {
    all_same = all_same && d1[i].video.v == d2[i].video.v &&
               d1[i].audio.v == d2[i].audio.v;
    any_diff = any_diff || d1[i].audio.v != d3[i].audio.v;
    double s = alignment_score(d1[i]);
    CHECK(s > 0.9);
    mean += s;
  }
  REQUIRE(all_same);
  CHECK(any_diff);
  mean /= d1.size();
  CHECK(mean > 0.9);
}

TEST_CASE("shuffled pairing collapses alignment", "[synth]") {
  ModelConfig mc = ModelConfig::desk();
  DataConfig dc;
  Rng rng(17);
  auto data = make_dataset(200, mc, dc, rng);
  double matched = 0, shuffled = 0;
  int n_cross = 0;
  for (size_t i = 0; i < data.size(); ++i) {
    matched += alignment_score(data[i]);
    for (size_t off : {7, 101}) {  // two derangement-style shifts
      MediaPair cross;
      cross.video = data[i].video;
      cross.audio = data[(i + off) % data.size()].audio;
      cross.fps = data[i].fps;
      cross.sr = data[i].sr;
      shuffled += alignment_score(cross);
      ++n_cross;
    }
  }
  matched /= data.size();
  shuffled /= n_cross;
  // Frozen oracle: shuffled mean -0.0066 over random frequency pairs.
  CHECK_THAT(shuffled, WithinAbs(0.0, 0.15));
  CHECK(matched - shuffled > 0.5);  // separation invariant
}

TEST_CASE("make_dataset validates its ranges", "[synth]") {
  ModelConfig mc = ModelConfig::desk();
  Rng rng(1);
  DataConfig dc;
  dc.blob_freq_min = 1.5;
  dc.blob_freq_max = 1.0;
  CHECK_THROWS_AS(make_dataset(4, mc, dc, rng), config_error);
  dc = DataConfig{};
  dc.tone_freq_max = 600.0;  // beyond Nyquist for sr=1024
  CHECK_THROWS_AS(make_dataset(4, mc, dc, rng), config_error);
  dc = DataConfig{};
  CHECK_THROWS_AS(make_dataset(0, mc, dc, rng), config_error);
}
