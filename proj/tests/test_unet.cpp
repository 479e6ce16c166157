// Coupled denoiser: parameter inventory, determinism, branch decoupling,
// receptive field against an interval-walk oracle, and gradient checks.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "mmdiff/embed.hpp"
#include "mmdiff/unet.hpp"

using namespace mmdiff;

namespace {

template <class S>
Tensor<S> randn_t(const Shape& sh, Rng& rng, double sd = 1.0) {
  Tensor<S> t(sh);
  for (auto& x : t.v) x = static_cast<S>(sd * rng.normal());
  return t;
}

// Small all-pass config for receptive-field probing: no normalization (it
// couples every position through the shared statistics), no attention.
ModelConfig rf_config() {
  ModelConfig m;
  m.base_channels = 8;
  m.channel_mults = {1, 2};
  m.blocks_per_scale = 1;
  m.frames = 4;
  m.video_channels = 2;
  m.height = 8;
  m.width = 8;
  m.audio_channels = 1;
  m.audio_len = 1024;
  m.fps = 4.0;
  m.sample_rate = 1024.0;
  m.audio_dilation_depth = 2;
  m.time_embed_dim = 16;
  m.head_dim = 4;
  m.video_attn_scales = {};
  m.cross_attn_scales = {};
  m.cross_attn_window = {};
  m.dropout = 0.0;
  m.use_group_norm = false;
  return m;
}

}  // namespace

TEST_CASE("time embedding layout and monotone slow channel", "[embed]") {
  std::vector<double> e0 = sinusoidal_embedding(0, 12);
  REQUIRE(e0.size() == 12);
  for (size_t i = 0; i < e0.size(); i += 2) {
    CHECK(e0[i] == 0.0);      // sin(0)
    CHECK(e0[i + 1] == 1.0);  // cos(0)
  }
  // Slowest sin channel (index dim-2) grows strictly with t over the whole
  // step range, so distinct steps get distinct encodings.
  double prev = -1.0;
  for (int t = 0; t <= 1000; t += 25) {
    std::vector<double> e = sinusoidal_embedding(t, 12);
    double slow = e[10];
    CHECK(slow > prev);
    prev = slow;
  }
  CHECK_THROWS_AS(sinusoidal_embedding(5, 7), config_error);
  CHECK_THROWS_AS(sinusoidal_embedding(5, 0), config_error);
  CHECK_THROWS_AS(sinusoidal_embedding(-1, 8), config_error);
  // dim=2 edge: single frequency pair.
  std::vector<double> e2 = sinusoidal_embedding(3, 2);
  CHECK_THAT(e2[0], Catch::Matchers::WithinAbs(std::sin(3.0), 1e-15));
  CHECK_THAT(e2[1], Catch::Matchers::WithinAbs(std::cos(3.0), 1e-15));
}

TEST_CASE("parameter inventory matches the frozen enumeration", "[unet]") {
  CoupledUnet<float> desk(ModelConfig::desk(), 1);
  CHECK(desk.param_count() == 1417220);
  CoupledUnet<float> micro(ModelConfig::micro(), 1);
  CHECK(micro.param_count() == 91076);

  // Every parameter name is unique and non-empty.
  std::set<std::string> names;
  const auto& store = micro.params();
  for (int i = 0; i < store.size(); ++i) {
    REQUIRE(!store[i].name.empty());
    names.insert(store[i].name);
  }
  CHECK(static_cast<int>(names.size()) == store.size());
}

TEST_CASE("paper-scale inventory lands within 15% of 115.13M", "[unet][slow]") {
  CoupledUnet<float> paper(ModelConfig::paper(), 1);
  CHECK(paper.param_count() == 108936452);
  double rel = std::abs(paper.param_count() / 115.13e6 - 1.0);
  CHECK(rel < 0.15);
}

TEST_CASE("initialization is seed-deterministic", "[unet]") {
  CoupledUnet<float> m1(ModelConfig::micro(), 42);
  CoupledUnet<float> m2(ModelConfig::micro(), 42);
  CoupledUnet<float> m3(ModelConfig::micro(), 43);
  REQUIRE(m1.params().size() == m2.params().size());
  bool any_diff_seed = false;
  for (int i = 0; i < m1.params().size(); ++i) {
    REQUIRE(m1.params()[i].value == m2.params()[i].value);
    any_diff_seed = any_diff_seed || m1.params()[i].value != m3.params()[i].value;
  }
  CHECK(any_diff_seed);
}

TEST_CASE("dilation ladder follows the wrap-around doubling rule", "[unet]") {
  CoupledUnet<float> micro(ModelConfig::micro(), 1);
  CHECK(micro.dilation_ladder() ==
        std::vector<int>{1, 2, 4, 8, 16, 1, 2, 4, 8, 16, 1, 2});
  for (auto cfg : {ModelConfig::desk(), ModelConfig::micro()}) {
    CoupledUnet<float> m(cfg, 1);
    const auto& lad = m.dilation_ladder();
    REQUIRE(!lad.empty());
    for (size_t k = 0; k < lad.size(); ++k)
      CHECK(lad[k] == 1 << (k % (cfg.audio_dilation_depth + 1)));
  }
}

TEST_CASE("forward shapes, determinism, and instrumentation", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  CoupledUnet<double> m(cfg, 7);
  Rng data(3);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data);
  Tensor<double> v = randn_t<double>(m.video_shape(), data);

  Rng r1(11);
  NoisePair<double> e1 = m.eps(a, v, 500, r1);
  CHECK(e1.eps_audio.shape == m.audio_shape());
  CHECK(e1.eps_video.shape == m.video_shape());

  const AttnStats& st = m.last_stats();
  CHECK(st.audio_self == 0);
  CHECK(st.cross == 3);          // enc.s2, mid, dec.s2
  CHECK(st.video_spatial == 3);  // one per video attention block
  CHECK(st.video_temporal == 3);
  REQUIRE(st.realized_shifts.size() == 3);
  for (int r : st.realized_shifts) CHECK((r >= 0 && r <= cfg.frames - 2));
  CHECK(st.cross_key_tokens_per_segment == 2L * 4 * 4);  // S * H/2 * W/2
  CHECK(st.dense_key_tokens_per_segment == 4L * 4 * 4);  // F * H/2 * W/2
  CHECK(st.realized_dilations == m.dilation_ladder());

  Rng r2(11);
  NoisePair<double> e2 = m.eps(a, v, 500, r2);
  REQUIRE(e1.eps_audio.v == e2.eps_audio.v);
  REQUIRE(e1.eps_video.v == e2.eps_video.v);

  // The prediction depends on the step index.
  Rng r3(11);
  NoisePair<double> e3 = m.eps(a, v, 499, r3);
  CHECK(e1.eps_audio.v != e3.eps_audio.v);

  // Shape and step validation.
  Rng r4(11);
  Tensor<double> bad({1, 32});
  CHECK_THROWS_AS(m.eps(bad, v, 500, r4), config_error);
  CHECK_THROWS_AS(m.eps(a, v, 0, r4), config_error);
  CHECK_THROWS_AS(m.eps(a, v, 1001, r4), config_error);
}

TEST_CASE("pinned shift makes the forward rng-free", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  cfg.fixed_shift = 1;
  CoupledUnet<double> m(cfg, 7);
  Rng data(3);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data);
  Tensor<double> v = randn_t<double>(m.video_shape(), data);
  Rng r1(11);
  uint64_t probe = Rng(11).next_u64();
  m.eps(a, v, 500, r1);
  CHECK(m.last_stats().realized_shifts == std::vector<int>{1, 1, 1});
  CHECK(r1.next_u64() == probe);
}

TEST_CASE("without cross attention the audio branch ignores video", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  cfg.cross_attn_scales = {};
  cfg.cross_attn_window = {};
  CoupledUnet<double> m(cfg, 5);
  Rng data(9);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data);
  Tensor<double> v1 = randn_t<double>(m.video_shape(), data);
  Tensor<double> v2 = randn_t<double>(m.video_shape(), data);

  Rng r1(1), r2(1);
  NoisePair<double> e1 = m.eps(a, v1, 300, r1);
  NoisePair<double> e2 = m.eps(a, v2, 300, r2);
  REQUIRE(e1.eps_audio.v == e2.eps_audio.v);  // bit-identical
  CHECK(e1.eps_video.v != e2.eps_video.v);
  CHECK(m.last_stats().cross == 0);

  // Symmetric direction: audio never reaches the video head either.
  Tensor<double> a2 = randn_t<double>(m.audio_shape(), data);
  Rng r3(1);
  NoisePair<double> e3 = m.eps(a2, v1, 300, r3);
  REQUIRE(e3.eps_video.v == e1.eps_video.v);
  CHECK(e3.eps_audio.v != e1.eps_audio.v);
}

TEST_CASE("cross attention carries information between branches", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  CoupledUnet<double> m(cfg, 5);
  Rng data(9);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data);
  Tensor<double> v1 = randn_t<double>(m.video_shape(), data);
  Tensor<double> v2 = v1;
  v2.v[17] += 0.5;

  Rng r1(1), r2(1);
  NoisePair<double> e1 = m.eps(a, v1, 300, r1);
  NoisePair<double> e2 = m.eps(a, v2, 300, r2);
  double max_da = 0;
  for (long i = 0; i < e1.eps_audio.numel(); ++i)
    max_da = std::max(max_da, std::abs(e1.eps_audio.v[i] - e2.eps_audio.v[i]));
  CHECK(max_da > 1e-9);

  // And audio reaches the video prediction.
  Tensor<double> a2 = a;
  a2.v[30] += 0.5;
  Rng r3(1);
  NoisePair<double> e3 = m.eps(a2, v1, 300, r3);
  double max_dv = 0;
  for (long i = 0; i < e1.eps_video.numel(); ++i)
    max_dv = std::max(max_dv, std::abs(e1.eps_video.v[i] - e3.eps_video.v[i]));
  CHECK(max_dv > 1e-9);
}

namespace {

// Interval propagation over the recorded audio conv/resample chain: the set
// of output positions an input impulse can reach.
struct Interval {
  long lo, hi, len;
};

Interval walk_chain(const std::vector<AudioChainOp>& chain, long pos, long len) {
  Interval cur{pos, pos, len};
  for (const AudioChainOp& op : chain) {
    if (op.upsample) {
      cur = {cur.lo * op.factor, cur.hi * op.factor + op.factor - 1,
             cur.len * op.factor};
      continue;
    }
    long reach = static_cast<long>(op.kernel - 1) * op.dilation;
    long out_len = (cur.len + 2 * op.pad - reach - 1) / op.stride + 1;
    // Output j reads inputs [j*stride - pad, j*stride - pad + reach].
    long lo = (cur.lo + op.pad - reach + op.stride - 1) / op.stride;  // ceil
    if (cur.lo + op.pad - reach < 0) lo = 0;                          // clamp
    long hi = (cur.hi + op.pad) / op.stride;                          // floor
    cur = {std::max(0L, lo), std::min(out_len - 1, hi), out_len};
  }
  return cur;
}

}  // namespace

TEST_CASE("audio receptive field matches the chain-walk oracle", "[unet]") {
  ModelConfig cfg = rf_config();
  CoupledUnet<double> m(cfg, 13);
  REQUIRE(m.audio_chain().size() == 17);

  const long T = cfg.audio_len, p = T / 2;
  Interval rf = walk_chain(m.audio_chain(), p, T);
  REQUIRE(rf.len == T);
  REQUIRE(rf.hi - rf.lo + 1 < T / 2);  // the probe has teeth

  Rng data(21);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data, 0.3);
  Tensor<double> v = randn_t<double>(m.video_shape(), data, 0.3);
  Tensor<double> a2 = a;
  a2.v[p] += 0.75;

  Rng r1(1), r2(1);
  NoisePair<double> e1 = m.eps(a, v, 400, r1);
  NoisePair<double> e2 = m.eps(a2, v, 400, r2);

  // Outside the walked interval the outputs agree bit-for-bit; inside, the
  // perturbation shows up over most of the interval.
  long nonzero = 0, first = -1, last = -1;
  for (long t = 0; t < T; ++t) {
    double d = e1.eps_audio.v[t] - e2.eps_audio.v[t];
    if (t < rf.lo || t > rf.hi) {
      REQUIRE(e1.eps_audio.v[t] == e2.eps_audio.v[t]);
    } else if (d != 0.0) {
      ++nonzero;
      if (first < 0) first = t;
      last = t;
    }
  }
  long width = rf.hi - rf.lo + 1;
  CHECK(nonzero > width * 9 / 10);
  CHECK(first - rf.lo < width / 8);  // realized support reaches near both edges
  CHECK(rf.hi - last < width / 8);

  // With cross attention off, the video prediction is untouched.
  REQUIRE(e1.eps_video.v == e2.eps_video.v);
}

TEST_CASE("training loss matches the evaluation-path objective", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  CoupledUnet<double> m(cfg, 19);
  Rng data(4);
  MediaPair pair;
  pair.video = Tensor<double>(m.video_shape());
  for (auto& x : pair.video.v) x = data.uniform();
  pair.audio = Tensor<double>(m.audio_shape());
  for (auto& x : pair.audio.v) x = data.uniform(-1.0, 1.0);
  pair.fps = cfg.fps;
  pair.sr = cfg.sample_rate;

  Rng r1(33), r2(33);
  double via_graph = m.loss_and_grad(pair, 250, r1);
  double via_eval = eps_loss<double>(m, pair, 250, r2);
  CHECK_THAT(via_graph, Catch::Matchers::WithinRel(via_eval, 1e-12));

  // Near-init prediction is close to zero, so the loss sits near
  // E[eps^2] per modality summed = 2.
  CHECK_THAT(via_graph, Catch::Matchers::WithinAbs(2.0, 0.5));

  LossConfig lc;
  lc.lambda_t = [](int) { return 2.5; };
  m.params().zero_grad();
  Rng r3(33);
  double scaled = m.loss_and_grad(pair, 250, r3, lc);
  CHECK_THAT(scaled, Catch::Matchers::WithinRel(2.5 * via_graph, 1e-12));

  LossConfig bad;
  bad.lambda_t = [](int) { return 0.0; };
  Rng r4(33);
  CHECK_THROWS_AS(m.loss_and_grad(pair, 250, r4, bad), config_error);
}

TEST_CASE("parameter gradients agree with finite differences", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  CoupledUnet<double> m(cfg, 23);
  Rng data(6);
  MediaPair pair;
  pair.video = Tensor<double>(m.video_shape());
  for (auto& x : pair.video.v) x = data.uniform();
  pair.audio = Tensor<double>(m.audio_shape());
  for (auto& x : pair.audio.v) x = data.uniform(-1.0, 1.0);
  pair.fps = cfg.fps;
  pair.sr = cfg.sample_rate;
  const int t = 345;
  const uint64_t seed = 77;

  m.params().zero_grad();
  Rng r0(seed);
  m.loss_and_grad(pair, t, r0);

  // One representative coordinate from every layer family.
  const std::vector<std::pair<std::string, long>> picks = {
      {"time.mlp1.w", 3},         {"time.mlp2.b", 0},
      {"stem.audio.w", 1},        {"stem.video.w", 2},
      {"enc.s1.b0.video.c1.w", 5}, {"enc.s1.b0.audio.t.w", 4},
      {"enc.s2.b0.audio.c2.w", 0}, {"enc.s2.b0.vattn.sp.q.w", 7},
      {"enc.s2.b0.xattn.av.w", 9}, {"enc.s2.b0.xattn.ao.b", 1},
      {"mid.in.video.t.w", 11},   {"mid.xattn.a_gn.b", 0},
      {"dec.s1.b0.audio.gn1.g", 2}, {"dec.s2.b0.video.sk.w", 3},
      {"head.video.c.w", 6},      {"head.audio.c.b", 0}};

  // Snapshot the clean analytic gradients before any finite-difference
  // evaluation: loss_and_grad accumulates into the store by design.
  auto& store = m.params();
  std::vector<double> analytic;
  for (const auto& [name, coord] : picks) {
    int idx = store.index_of(name);
    REQUIRE(coord < static_cast<long>(store[idx].value.size()));
    analytic.push_back(store[idx].grad[coord]);
  }

  const double h = 1e-4;
  for (size_t k = 0; k < picks.size(); ++k) {
    const auto& [name, coord] = picks[k];
    INFO(name << "[" << coord << "] analytic=" << analytic[k]);
    int idx = store.index_of(name);
    double orig = store[idx].value[coord];
    store[idx].value[coord] = orig + h;
    Rng rp(seed);
    double lp = m.loss_and_grad(pair, t, rp);
    store[idx].value[coord] = orig - h;
    Rng rm(seed);
    double lm = m.loss_and_grad(pair, t, rm);
    store[idx].value[coord] = orig;
    double fd = (lp - lm) / (2 * h);
    // Central differences on a ~O(2) loss resolve differences down to about
    // machine_eps*loss/h; below that only the absolute floor is meaningful.
    double tol = std::max(1e-4 * std::max(std::abs(fd), std::abs(analytic[k])), 1e-10);
    CHECK(std::abs(fd - analytic[k]) < tol);
  }
}

TEST_CASE("guided forward consumes the stream exactly like eps", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  CoupledUnet<double> m(cfg, 29);
  Rng data(8);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data);
  Tensor<double> v = randn_t<double>(m.video_shape(), data);
  Tensor<double> target = randn_t<double>(m.video_shape(), data);

  Rng r1(55), r2(55);
  NoisePair<double> plain = m.eps(a, v, 200, r1);
  auto guided = m.guided_eps(a, v, 200, 0.3, 1.01, target, /*audio_free=*/true, r2);
  REQUIRE(plain.eps_audio.v == guided.eps.eps_audio.v);
  REQUIRE(plain.eps_video.v == guided.eps.eps_video.v);
  CHECK(r1.next_u64() == r2.next_u64());
  CHECK(guided.grad_free.shape == m.audio_shape());

  Tensor<double> bad({2, 2});
  Rng r3(55);
  CHECK_THROWS_AS(m.guided_eps(a, v, 200, 0.3, 1.01, bad, true, r3), config_error);
}

TEST_CASE("guidance input gradient agrees with finite differences", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  CoupledUnet<double> m(cfg, 31);
  Rng data(14);
  Tensor<double> a = randn_t<double>(m.audio_shape(), data);
  Tensor<double> v = randn_t<double>(m.video_shape(), data);
  const int t = 150;
  const double ec = 0.4, isa = 1.02;
  const uint64_t seed = 91;

  // Audio free, video substituted: objective sum((isa*(v - ec*eps_v) - tgt)^2).
  Tensor<double> tgt_v = randn_t<double>(m.video_shape(), data);
  Rng rg(seed);
  auto guided = m.guided_eps(a, v, t, ec, isa, tgt_v, true, rg);
  auto objective_a = [&](const Tensor<double>& a_in) {
    Rng r(seed);
    NoisePair<double> e = m.eps(a_in, v, t, r);
    double s = 0;
    for (long i = 0; i < tgt_v.numel(); ++i) {
      double mu = isa * (v.v[i] - ec * e.eps_video.v[i]);
      double d = mu - tgt_v.v[i];
      s += d * d;
    }
    return s;
  };
  // The objective is O(hundreds), so cancellation in the central difference
  // limits resolution; h = 1e-3 keeps the quotient well conditioned.
  const double h = 1e-3;
  for (long coord : {0L, 7L, 31L, 63L}) {
    Tensor<double> ap = a, am = a;
    ap.v[coord] += h;
    am.v[coord] -= h;
    double fd = (objective_a(ap) - objective_a(am)) / (2 * h);
    double an = guided.grad_free.v[coord];
    INFO("audio coord " << coord << " analytic=" << an);
    double tol = std::max(5e-4 * std::max(std::abs(fd), std::abs(an)), 1e-8);
    CHECK(std::abs(fd - an) < tol);
  }

  // Video free, audio substituted.
  Tensor<double> tgt_a = randn_t<double>(m.audio_shape(), data);
  Rng rg2(seed);
  auto guided2 = m.guided_eps(a, v, t, ec, isa, tgt_a, false, rg2);
  CHECK(guided2.grad_free.shape == m.video_shape());
  auto objective_v = [&](const Tensor<double>& v_in) {
    Rng r(seed);
    NoisePair<double> e = m.eps(a, v_in, t, r);
    double s = 0;
    for (long i = 0; i < tgt_a.numel(); ++i) {
      double mu = isa * (a.v[i] - ec * e.eps_audio.v[i]);
      double d = mu - tgt_a.v[i];
      s += d * d;
    }
    return s;
  };
  for (long coord : {0L, 100L, 500L}) {
    Tensor<double> vp = v, vm = v;
    vp.v[coord] += h;
    vm.v[coord] -= h;
    double fd = (objective_v(vp) - objective_v(vm)) / (2 * h);
    double an = guided2.grad_free.v[coord];
    INFO("video coord " << coord << " analytic=" << an);
    double tol = std::max(5e-4 * std::max(std::abs(fd), std::abs(an)), 1e-8);
    CHECK(std::abs(fd - an) < tol);
  }
}

TEST_CASE("scale-shift conditioning variant also passes a grad check", "[unet]") {
  ModelConfig cfg = ModelConfig::micro();
  cfg.time_scale_shift = true;
  cfg.sigma_mode = SigmaMode::beta_tilde;
  CoupledUnet<double> m(cfg, 37);
  Rng data(16);
  MediaPair pair;
  pair.video = Tensor<double>(m.video_shape());
  for (auto& x : pair.video.v) x = data.uniform();
  pair.audio = Tensor<double>(m.audio_shape());
  for (auto& x : pair.audio.v) x = data.uniform(-1.0, 1.0);
  pair.fps = cfg.fps;
  pair.sr = cfg.sample_rate;

  m.params().zero_grad();
  Rng r0(101);
  m.loss_and_grad(pair, 500, r0);
  auto& store = m.params();
  int idx = store.index_of("enc.s1.b0.video.t.w");
  double analytic = store[idx].grad[2];
  double orig = store[idx].value[2];
  const double h = 1e-4;
  store[idx].value[2] = orig + h;
  Rng rp(101);
  double lp = m.loss_and_grad(pair, 500, rp);
  store[idx].value[2] = orig - h;
  Rng rm(101);
  double lm = m.loss_and_grad(pair, 500, rm);
  store[idx].value[2] = orig;
  double fd = (lp - lm) / (2 * h);
  INFO("analytic=" << analytic << " fd=" << fd);
  double tol = std::max(1e-4 * std::max(std::abs(fd), std::abs(analytic)), 1e-10);
  CHECK(std::abs(fd - analytic) < tol);
}
