// The coupled two-branch denoiser: a video U-Net of factorized 1D+2D
// blocks with spatial/temporal self-attention, an audio U-Net of dilated
// 1D conv blocks (no attention), linked at configured scales by RS-MMA.
//
// Construction registers every parameter (name, shape, deterministic init
// from the seed) and records a layer program; each forward interprets the
// program onto a fresh autodiff graph, so the same code path serves
// evaluation (constant params), training (param gradients), and input
// gradients for guidance.
#pragma once

#include "mmdiff/config.hpp"
#include "mmdiff/diffusion.hpp"
#include "mmdiff/embed.hpp"
#include "mmdiff/rsmma.hpp"

namespace mmdiff {

// One audio-path conv/resample along the encoder->middle->decoder chain,
// for receptive-field accounting.
struct AudioChainOp {
  bool upsample = false;
  int kernel = 1, stride = 1, pad = 0, dilation = 1, factor = 1;
};

template <class S>
class CoupledUnet {
 public:
  struct GuidedEps {
    NoisePair<S> eps;
    Tensor<S> grad_free;
  };

  CoupledUnet(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    sched_ = cfg_.make_schedule();
    Rng init(seed);
    build_program(init);
  }

  const ModelConfig& config() const { return cfg_; }
  const NoiseSchedule& schedule() const { return sched_; }
  Shape audio_shape() const { return cfg_.audio_shape(); }
  Shape video_shape() const { return cfg_.video_shape(); }
  ParamStore<S>& params() { return store_; }
  const ParamStore<S>& params() const { return store_; }
  long param_count() const { return store_.total_params(); }
  const AttnStats& last_stats() const { return stats_; }
  const std::vector<int>& dilation_ladder() const { return dilations_; }
  const std::vector<AudioChainOp>& audio_chain() const { return audio_chain_; }

  // Evaluation forward: parameters enter as constants, dropout off.
  NoisePair<S> eps(const Tensor<S>& a, const Tensor<S>& v, int t, Rng& rng) {
    Graph<S> g;
    Built b = build_forward(g, a, v, t, rng, /*train=*/false, /*with_params=*/false,
                            false, false);
    return extract_eps(g, b);
  }

  // Forward plus d(sum((mu_sub - target)^2))/d(free input), where mu_sub is
  // the substituted modality's reverse mean under the caller's coefficients.
  GuidedEps guided_eps(const Tensor<S>& a, const Tensor<S>& v, int t,
                       double eps_coef, double inv_sqrt_alpha,
                       const Tensor<S>& target_sub, bool audio_free, Rng& rng) {
    Graph<S> g;
    Built b = build_forward(g, a, v, t, rng, false, false,
                            /*grad audio in=*/audio_free, /*grad video in=*/!audio_free);
    NodeRef sub_in = audio_free ? b.v_in : b.a_in;
    NodeRef eps_sub = audio_free ? b.eps_v : b.eps_a;
    NodeRef free_in = audio_free ? b.a_in : b.v_in;
    if (g.shape(sub_in) != Shape(target_sub.shape.begin(), target_sub.shape.end()) &&
        g.numel(sub_in) != target_sub.numel())
      throw config_error("guided_eps: target shape mismatch");
    // mu = isa * (x_sub - eps_coef * eps_sub)
    NodeRef mu = scale(g, sub(g, sub_in, scale(g, eps_sub, eps_coef)), inv_sqrt_alpha);
    Tensor<S> tgt(g.shape(mu));
    if (tgt.numel() != target_sub.numel())
      throw config_error("guided_eps: target size mismatch");
    std::copy(target_sub.v.begin(), target_sub.v.end(), tgt.v.begin());
    NodeRef loss = mse_mean(g, mu, constant(g, tgt));
    g.backward(loss);
    GuidedEps out;
    out.eps = extract_eps(g, b);
    const Shape free_shape = audio_free ? audio_shape() : video_shape();
    out.grad_free = Tensor<S>(free_shape);
    const S* gr = g.grad(free_in);
    const double n = static_cast<double>(g.numel(mu));  // sum = n * mean
    for (long i = 0; i < out.grad_free.numel(); ++i)
      out.grad_free.v[i] = static_cast<S>(gr[i] * n);
    return out;
  }

  // Training objective on one clean pair: draws (t already chosen by the
  // caller), runs the dropout-active forward with parameter gradients, and
  // accumulates d(loss)/d(params) into the store.
  double loss_and_grad(const MediaPair& pair0, int t, Rng& rng,
                       const LossConfig& lc = {}) {
    double lam = lc.lambda_t(t);
    if (!(lam > 0)) throw config_error("loss weight lambda_t must be positive");
    Tensor<S> a0 = normalize_audio<S>(pair0.audio);
    Tensor<S> v0 = normalize_video<S>(pair0.video);
    NoisedPair<S> np = noise_pair(a0, v0, t, sched_, rng);
    Graph<S> g;
    Built b = build_forward(g, np.state.audio, np.state.video, t, rng,
                            /*train=*/true, /*with_params=*/true, false, false);
    NodeRef ta = constant(g, reshape_tensor(np.eps.eps_audio, g.shape(b.eps_a)));
    NodeRef tv = constant(g, np.eps.eps_video);
    NodeRef la = mse_mean(g, b.eps_a, ta);
    NodeRef lv = mse_mean(g, b.eps_v, tv);
    NodeRef loss = scale(g, add(g, la, lv), lam);
    double val = g.val(loss)[0];
    if (!std::isfinite(val)) throw runtime_fault("training loss diverged (non-finite)");
    g.backward(loss);
    return val;
  }

 private:
  enum class K {
    v_stem, a_stem, v_block, a_block, v_attn, x_attn, push_skip, pop_skip,
    v_down, a_down, v_up, a_up, v_head, a_head
  };
  struct LayerOp {
    K k;
    int cin = 0, cout = 0;
    int d1 = 1, d2 = 1;  // audio block dilations
    int win = 0;         // RS-MMA window size
    std::vector<int> p;  // parameter store indices
  };
  struct Built {
    NodeRef a_in = -1, v_in = -1, eps_a = -1, eps_v = -1;
  };
  enum class Init { zero, one, fan, fan_small };

  static Tensor<S> reshape_tensor(const Tensor<S>& t, const Shape& s) {
    Tensor<S> r(s);
    if (r.numel() != t.numel()) throw config_error("reshape_tensor: size mismatch");
    r.v = t.v;
    return r;
  }

  int reg(const std::string& name, Shape shape, Init kind, Rng& init) {
    int idx = store_.add(name, std::move(shape));
    auto& e = store_[idx];
    switch (kind) {
      case Init::zero:
        break;
      case Init::one:
        std::fill(e.value.begin(), e.value.end(), S(1));
        break;
      case Init::fan:
      case Init::fan_small: {
        long fan_in = static_cast<long>(e.value.size()) / e.shape[0];
        double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
        if (kind == Init::fan_small) sd *= 0.01;  // keep late layers near-zero
        for (auto& v : e.value) v = static_cast<S>(init.normal() * sd);
        break;
      }
    }
    return idx;
  }

  void build_program(Rng& init) {
    const long hid = 4L * cfg_.time_embed_dim;
    tm1w_ = reg("time.mlp1.w", {hid, cfg_.time_embed_dim}, Init::fan, init);
    tm1b_ = reg("time.mlp1.b", {hid}, Init::zero, init);
    tm2w_ = reg("time.mlp2.w", {hid, hid}, Init::fan, init);
    tm2b_ = reg("time.mlp2.b", {hid}, Init::zero, init);

    int dil_k = 1;
    auto ladder = [&]() {
      int d = 1 << ((dil_k - 1) % (cfg_.audio_dilation_depth + 1));
      ++dil_k;
      dilations_.push_back(d);
      return d;
    };
    auto tout = [&](int cin) { return cfg_.time_scale_shift ? 2L * cin : cin; };

    auto reg_vblock = [&](const std::string& pre, int cin, int cout) {
      LayerOp op{K::v_block};
      op.cin = cin;
      op.cout = cout;
      bool tf = cfg_.video_temporal_first;
      op.p.push_back(reg(pre + ".gn1.g", {cin}, Init::one, init));
      op.p.push_back(reg(pre + ".gn1.b", {cin}, Init::zero, init));
      op.p.push_back(reg(pre + ".t.w", {tout(cin), hid}, Init::fan, init));
      op.p.push_back(reg(pre + ".t.b", {tout(cin)}, Init::zero, init));
      op.p.push_back(reg(pre + ".c1.w",
                         tf ? Shape{cout, cin, 3} : Shape{cout, cin, 3, 3},
                         Init::fan, init));
      op.p.push_back(reg(pre + ".c1.b", {cout}, Init::zero, init));
      op.p.push_back(reg(pre + ".gn2.g", {cout}, Init::one, init));
      op.p.push_back(reg(pre + ".gn2.b", {cout}, Init::zero, init));
      op.p.push_back(reg(pre + ".c2.w",
                         tf ? Shape{cout, cout, 3, 3} : Shape{cout, cout, 3},
                         Init::fan_small, init));
      op.p.push_back(reg(pre + ".c2.b", {cout}, Init::zero, init));
      if (cin != cout) {
        op.p.push_back(reg(pre + ".sk.w", {cout, cin, 1, 1}, Init::fan, init));
        op.p.push_back(reg(pre + ".sk.b", {cout}, Init::zero, init));
      }
      ops_.push_back(std::move(op));
    };
    auto reg_ablock = [&](const std::string& pre, int cin, int cout) {
      LayerOp op{K::a_block};
      op.cin = cin;
      op.cout = cout;
      op.d1 = ladder();
      op.d2 = ladder();
      op.p.push_back(reg(pre + ".gn1.g", {cin}, Init::one, init));
      op.p.push_back(reg(pre + ".gn1.b", {cin}, Init::zero, init));
      op.p.push_back(reg(pre + ".t.w", {tout(cin), hid}, Init::fan, init));
      op.p.push_back(reg(pre + ".t.b", {tout(cin)}, Init::zero, init));
      op.p.push_back(reg(pre + ".c1.w", {cout, cin, 3}, Init::fan, init));
      op.p.push_back(reg(pre + ".c1.b", {cout}, Init::zero, init));
      op.p.push_back(reg(pre + ".gn2.g", {cout}, Init::one, init));
      op.p.push_back(reg(pre + ".gn2.b", {cout}, Init::zero, init));
      op.p.push_back(reg(pre + ".c2.w", {cout, cout, 3}, Init::fan_small, init));
      op.p.push_back(reg(pre + ".c2.b", {cout}, Init::zero, init));
      if (cin != cout) {
        op.p.push_back(reg(pre + ".sk.w", {cout, cin, 1}, Init::fan, init));
        op.p.push_back(reg(pre + ".sk.b", {cout}, Init::zero, init));
      }
      audio_chain_.push_back({false, 3, 1, op.d1, op.d1, 1});
      audio_chain_.push_back({false, 3, 1, op.d2, op.d2, 1});
      ops_.push_back(std::move(op));
    };
    auto reg_attn_part = [&](const std::string& pre, int c, std::vector<int>& p) {
      p.push_back(reg(pre + ".gn.g", {c}, Init::one, init));
      p.push_back(reg(pre + ".gn.b", {c}, Init::zero, init));
      for (const char* nm : {"q", "k", "v"}) {
        p.push_back(reg(pre + "." + nm + ".w", {c, c}, Init::fan, init));
        p.push_back(reg(pre + "." + nm + ".b", {c}, Init::zero, init));
      }
      p.push_back(reg(pre + ".o.w", {c, c}, Init::fan_small, init));
      p.push_back(reg(pre + ".o.b", {c}, Init::zero, init));
    };
    auto reg_vattn = [&](const std::string& pre, int c) {
      LayerOp op{K::v_attn};
      op.cin = op.cout = c;
      reg_attn_part(pre + ".sp", c, op.p);
      reg_attn_part(pre + ".te", c, op.p);
      ops_.push_back(std::move(op));
    };
    auto reg_xattn = [&](const std::string& pre, int c, int win) {
      LayerOp op{K::x_attn};
      op.cin = op.cout = c;
      op.win = win;
      op.p.push_back(reg(pre + ".a_gn.g", {c}, Init::one, init));
      op.p.push_back(reg(pre + ".a_gn.b", {c}, Init::zero, init));
      op.p.push_back(reg(pre + ".v_gn.g", {c}, Init::one, init));
      op.p.push_back(reg(pre + ".v_gn.b", {c}, Init::zero, init));
      for (const char* nm : {"aq", "ak", "av", "ao", "vq", "vk", "vv", "vo"}) {
        Init ik = (nm[1] == 'o') ? Init::fan_small : Init::fan;
        op.p.push_back(reg(pre + "." + nm + ".w", {c, c}, ik, init));
        op.p.push_back(reg(pre + "." + nm + ".b", {c}, Init::zero, init));
      }
      ops_.push_back(std::move(op));
    };
    auto reg_simple = [&](K k, const std::string& pre, Shape wshape, Init ik) {
      LayerOp op{k};
      op.p.push_back(reg(pre + ".w", wshape, ik, init));
      op.p.push_back(reg(pre + ".b", {wshape[0]}, Init::zero, init));
      ops_.push_back(std::move(op));
    };

    const int ns = cfg_.scales();
    const int Cv = cfg_.video_channels, Ca = cfg_.audio_channels;
    reg_simple(K::v_stem, "stem.video", {cfg_.base_channels, Cv, 3, 3}, Init::fan);
    audio_chain_.push_back({false, 3, 1, 1, 1, 1});
    reg_simple(K::a_stem, "stem.audio", {cfg_.base_channels, Ca, 3}, Init::fan);

    int cur = cfg_.base_channels;
    for (int s = 0; s < ns; ++s) {
      const int co = cfg_.channels_at(s + 1);
      for (int b = 0; b < cfg_.blocks_per_scale; ++b) {
        std::string pre = "enc.s" + std::to_string(s + 1) + ".b" + std::to_string(b);
        reg_vblock(pre + ".video", cur, co);
        reg_ablock(pre + ".audio", cur, co);
        cur = co;
        if (cfg_.scale_in(cfg_.video_attn_scales, s + 1)) reg_vattn(pre + ".vattn", cur);
        if (cfg_.scale_in(cfg_.cross_attn_scales, s + 1))
          reg_xattn(pre + ".xattn", cur, cfg_.window_for_scale(s + 1));
        ops_.push_back({K::push_skip});
        skip_channels_.push_back(cur);
      }
      if (s < ns - 1) {
        std::string pre = "down.s" + std::to_string(s + 1);
        reg_simple(K::v_down, pre + ".video", {cur, cur, 3, 3}, Init::fan);
        audio_chain_.push_back({false, 4, 4, 0, 1, 1});
        reg_simple(K::a_down, pre + ".audio", {cur, cur, 4}, Init::fan);
      }
    }

    reg_vblock("mid.in.video", cur, cur);
    reg_ablock("mid.in.audio", cur, cur);
    if (cfg_.scale_in(cfg_.video_attn_scales, ns)) reg_vattn("mid.vattn", cur);
    if (cfg_.scale_in(cfg_.cross_attn_scales, ns))
      reg_xattn("mid.xattn", cur, cfg_.window_for_scale(ns));
    reg_vblock("mid.out.video", cur, cur);
    reg_ablock("mid.out.audio", cur, cur);

    std::vector<int> pending = skip_channels_;
    for (int s = ns - 1; s >= 0; --s) {
      const int co = cfg_.channels_at(s + 1);
      for (int b = 0; b < cfg_.blocks_per_scale; ++b) {
        int sk = pending.back();
        pending.pop_back();
        ops_.push_back({K::pop_skip});
        std::string pre = "dec.s" + std::to_string(s + 1) + ".b" + std::to_string(b);
        reg_vblock(pre + ".video", cur + sk, co);
        reg_ablock(pre + ".audio", cur + sk, co);
        cur = co;
        if (cfg_.scale_in(cfg_.video_attn_scales, s + 1)) reg_vattn(pre + ".vattn", cur);
        if (cfg_.scale_in(cfg_.cross_attn_scales, s + 1))
          reg_xattn(pre + ".xattn", cur, cfg_.window_for_scale(s + 1));
      }
      if (s > 0) {
        std::string pre = "up.s" + std::to_string(s + 1);
        reg_simple(K::v_up, pre + ".video", {cur, cur, 3, 3}, Init::fan);
        audio_chain_.push_back({true, 1, 1, 0, 1, 4});
        audio_chain_.push_back({false, 5, 1, 2, 1, 1});
        reg_simple(K::a_up, pre + ".audio", {cur, cur, 5}, Init::fan);
      }
    }

    {
      LayerOp op{K::v_head};
      op.p.push_back(reg("head.video.gn.g", {cur}, Init::one, init));
      op.p.push_back(reg("head.video.gn.b", {cur}, Init::zero, init));
      op.p.push_back(reg("head.video.c.w", {Cv, cur, 3, 3}, Init::fan_small, init));
      op.p.push_back(reg("head.video.c.b", {Cv}, Init::zero, init));
      ops_.push_back(std::move(op));
    }
    {
      LayerOp op{K::a_head};
      op.p.push_back(reg("head.audio.gn.g", {cur}, Init::one, init));
      op.p.push_back(reg("head.audio.gn.b", {cur}, Init::zero, init));
      op.p.push_back(reg("head.audio.c.w", {Ca, cur, 3}, Init::fan_small, init));
      op.p.push_back(reg("head.audio.c.b", {Ca}, Init::zero, init));
      audio_chain_.push_back({false, 3, 1, 1, 1, 1});
      ops_.push_back(std::move(op));
    }
  }

  Built build_forward(Graph<S>& g, const Tensor<S>& a, const Tensor<S>& v, int t,
                      Rng& rng, bool train, bool with_params, bool ga, bool gv) {
    sched_.check_step(t);
    if (a.shape != audio_shape())
      throw config_error("model forward: audio shape " + shape_str(a.shape) +
                         " != " + shape_str(audio_shape()));
    if (v.shape != video_shape())
      throw config_error("model forward: video shape " + shape_str(v.shape) +
                         " != " + shape_str(video_shape()));
    stats_.reset();
    stats_.realized_dilations = dilations_;
    const double drop = train ? cfg_.dropout : 0.0;
    const bool use_norm = cfg_.use_group_norm;

    Built out;
    out.a_in = g.new_node({1, cfg_.audio_channels, cfg_.audio_len}, ga);
    std::copy(a.v.begin(), a.v.end(), g.val(out.a_in));
    out.v_in = g.new_node(video_shape(), gv);
    std::copy(v.v.begin(), v.v.end(), g.val(out.v_in));

    auto P = [&](int i) -> NodeRef {
      if (with_params) return param(g, store_, i);
      NodeRef r = g.new_node(store_[i].shape, false);
      std::copy(store_[i].value.begin(), store_[i].value.end(), g.val(r));
      return r;
    };

    // Shared time conditioning vector.
    std::vector<double> se = sinusoidal_embedding(t, cfg_.time_embed_dim);
    Tensor<S> emb({1, cfg_.time_embed_dim});
    for (long i = 0; i < emb.numel(); ++i) emb.v[i] = static_cast<S>(se[i]);
    NodeRef stemb = silu(
        g, linear(g, silu(g, linear(g, constant(g, emb), P(tm1w_), P(tm1b_))),
                  P(tm2w_), P(tm2b_)));

    auto inject = [&](NodeRef x, int tw, int tb, long cin) {
      NodeRef tv = linear(g, stemb, P(tw), P(tb));
      if (cfg_.time_scale_shift)
        return channel_scale_shift(g, x, reshape(g, tv, {2 * cin}));
      return add_channel_bias(g, x, reshape(g, tv, {cin}));
    };
    auto temporal_conv = [&](NodeRef x4, int wi, int bi) {
      const Shape xs = g.shape(x4);
      long Fh = xs[0], H = xs[2], W = xs[3];
      long co = store_[wi].shape[0];
      NodeRef tk = reshape(g, permute(g, x4, {2, 3, 1, 0}), {H * W, xs[1], Fh});
      tk = conv1d(g, tk, P(wi), P(bi), 1, 1, 1);
      return permute(g, reshape(g, tk, {H, W, co, Fh}), {3, 2, 0, 1});
    };
    auto vblock = [&](NodeRef x, const LayerOp& op) {
      const long cin = op.cin, cout = op.cout;
      NodeRef h = x;
      if (use_norm)
        h = group_norm(g, h, P(op.p[0]), P(op.p[1]), default_gn_groups(cin));
      h = silu(g, inject(h, op.p[2], op.p[3], cin));
      if (cfg_.video_temporal_first)
        h = temporal_conv(h, op.p[4], op.p[5]);
      else
        h = conv2d(g, h, P(op.p[4]), P(op.p[5]), 1, 1);
      if (use_norm)
        h = group_norm(g, h, P(op.p[6]), P(op.p[7]), default_gn_groups(cout));
      h = dropout(g, silu(g, h), drop, rng);
      if (cfg_.video_temporal_first)
        h = conv2d(g, h, P(op.p[8]), P(op.p[9]), 1, 1);
      else
        h = temporal_conv(h, op.p[8], op.p[9]);
      NodeRef skip = cin == cout ? x : conv2d(g, x, P(op.p[10]), P(op.p[11]), 1, 0);
      return add(g, h, skip);
    };
    auto ablock = [&](NodeRef x, const LayerOp& op) {
      const long cin = op.cin, cout = op.cout;
      NodeRef h = x;
      if (use_norm)
        h = group_norm(g, h, P(op.p[0]), P(op.p[1]), default_gn_groups(cin));
      h = silu(g, inject(h, op.p[2], op.p[3], cin));
      h = conv1d(g, h, P(op.p[4]), P(op.p[5]), 1, op.d1, op.d1);
      if (use_norm)
        h = group_norm(g, h, P(op.p[6]), P(op.p[7]), default_gn_groups(cout));
      h = dropout(g, silu(g, h), drop, rng);
      h = conv1d(g, h, P(op.p[8]), P(op.p[9]), 1, op.d2, op.d2);
      NodeRef skip = cin == cout ? x : conv1d(g, x, P(op.p[10]), P(op.p[11]), 1, 0, 1);
      return add(g, h, skip);
    };
    auto self_attn = [&](NodeRef tokens, const int* p, long heads) {
      // p: [q.w, q.b, k.w, k.b, v.w, v.b, o.w, o.b]
      return mma_cross(g, tokens, tokens, P(p[0]), P(p[1]), P(p[2]), P(p[3]),
                       P(p[4]), P(p[5]), P(p[6]), P(p[7]), heads);
    };
    auto vattn = [&](NodeRef x, const LayerOp& op) {
      const Shape xs = g.shape(x);
      const long Fh = xs[0], C = xs[1], H = xs[2], W = xs[3];
      const long heads = C / cfg_.head_dim;
      // Spatial: per-frame tokens over H*W.
      NodeRef xn = use_norm
                       ? group_norm(g, x, P(op.p[0]), P(op.p[1]), default_gn_groups(C))
                       : x;
      NodeRef tok = reshape(g, permute(g, xn, {0, 2, 3, 1}), {Fh, H * W, C});
      NodeRef att = self_attn(tok, op.p.data() + 2, heads);
      stats_.video_spatial++;
      x = add(g, x, permute(g, reshape(g, att, {Fh, H, W, C}), {0, 3, 1, 2}));
      // Temporal: per-pixel tokens over frames.
      xn = use_norm
               ? group_norm(g, x, P(op.p[10]), P(op.p[11]), default_gn_groups(C))
               : x;
      tok = reshape(g, permute(g, xn, {2, 3, 0, 1}), {H * W, Fh, C});
      att = self_attn(tok, op.p.data() + 12, heads);
      stats_.video_temporal++;
      return add(g, x, permute(g, reshape(g, att, {H, W, Fh, C}), {2, 3, 0, 1}));
    };

    NodeRef ca = -1, cv = -1;
    std::vector<std::pair<NodeRef, NodeRef>> skips;
    for (const LayerOp& op : ops_) {
      switch (op.k) {
        case K::v_stem: cv = conv2d(g, out.v_in, P(op.p[0]), P(op.p[1]), 1, 1); break;
        case K::a_stem: ca = conv1d(g, out.a_in, P(op.p[0]), P(op.p[1]), 1, 1, 1); break;
        case K::v_block: cv = vblock(cv, op); break;
        case K::a_block: ca = ablock(ca, op); break;
        case K::v_attn: cv = vattn(cv, op); break;
        case K::x_attn: {
          RsMmaWeights w;
          NodeRef* slots[20] = {&w.gn_a_gamma, &w.gn_a_beta, &w.gn_v_gamma,
                                &w.gn_v_beta,  &w.aq_w,      &w.aq_b,
                                &w.ak_w,       &w.ak_b,      &w.av_w,
                                &w.av_b,       &w.ao_w,      &w.ao_b,
                                &w.vq_w,       &w.vq_b,      &w.vk_w,
                                &w.vk_b,       &w.vv_w,      &w.vv_b,
                                &w.vo_w,       &w.vo_b};
          for (int i = 0; i < 20; ++i) *slots[i] = P(op.p[i]);
          auto [na, nv] = rs_mma_block(g, ca, cv, w, op.win, cfg_.head_dim, use_norm,
                                       rng, cfg_.fixed_shift, &stats_);
          ca = na;
          cv = nv;
          break;
        }
        case K::push_skip: skips.emplace_back(ca, cv); break;
        case K::pop_skip: {
          auto [sa, sv] = skips.back();
          skips.pop_back();
          ca = concat_channels(g, ca, sa);
          cv = concat_channels(g, cv, sv);
          break;
        }
        case K::v_down: cv = conv2d(g, cv, P(op.p[0]), P(op.p[1]), 2, 1); break;
        case K::a_down: ca = conv1d(g, ca, P(op.p[0]), P(op.p[1]), 4, 0, 1); break;
        case K::v_up:
          cv = conv2d(g, upsample_nearest_2d(g, cv, 2), P(op.p[0]), P(op.p[1]), 1, 1);
          break;
        case K::a_up:
          ca = conv1d(g, upsample_nearest_1d(g, ca, 4), P(op.p[0]), P(op.p[1]), 1, 2, 1);
          break;
        case K::v_head: {
          NodeRef h = use_norm ? group_norm(g, cv, P(op.p[0]), P(op.p[1]),
                                            default_gn_groups(g.shape(cv)[1]))
                               : cv;
          out.eps_v = conv2d(g, silu(g, h), P(op.p[2]), P(op.p[3]), 1, 1);
          break;
        }
        case K::a_head: {
          NodeRef h = use_norm ? group_norm(g, ca, P(op.p[0]), P(op.p[1]),
                                            default_gn_groups(g.shape(ca)[1]))
                               : ca;
          out.eps_a = conv1d(g, silu(g, h), P(op.p[2]), P(op.p[3]), 1, 1, 1);
          break;
        }
      }
    }
    if (!all_finite(g.node(out.eps_a).val) || !all_finite(g.node(out.eps_v).val))
      throw runtime_fault("model forward produced non-finite activations");
    return out;
  }

  NoisePair<S> extract_eps(Graph<S>& g, const Built& b) {
    NoisePair<S> out;
    out.eps_audio = Tensor<S>(audio_shape());
    std::copy(g.val(b.eps_a), g.val(b.eps_a) + out.eps_audio.numel(),
              out.eps_audio.v.begin());
    out.eps_video = Tensor<S>(video_shape());
    std::copy(g.val(b.eps_v), g.val(b.eps_v) + out.eps_video.numel(),
              out.eps_video.v.begin());
    return out;
  }

  ModelConfig cfg_;
  NoiseSchedule sched_;
  ParamStore<S> store_;
  std::vector<LayerOp> ops_;
  std::vector<int> skip_channels_;
  std::vector<int> dilations_;
  std::vector<AudioChainOp> audio_chain_;
  AttnStats stats_;
  int tm1w_ = -1, tm1b_ = -1, tm2w_ = -1, tm2b_ = -1;
};

}  // namespace mmdiff
