// Random-shift multi-modal attention: frame-aligned audio segmentation,
// modularly wrapped frame windows, and the windowed cross-attention block
// used to couple the two branches.
#pragma once

#include <utility>

#include "mmdiff/graph_attn.hpp"
#include "mmdiff/graph_linalg.hpp"
#include "mmdiff/graph_norm.hpp"
#include "mmdiff/rng.hpp"

namespace mmdiff {

struct AttentionPlan {
  int F = 0;            // frame count
  int S = 0;            // window size
  int R = 0;            // shift
  int d_k = 0;          // per-head key dimension
  int segment_len = 0;  // audio positions per segment

  void validate() const {
    require(F >= 1, "attention plan: F must be >= 1");
    require(S >= 1 && S <= F, "attention plan: need 1 <= S <= F");
    require(R >= 0 && R <= F - S, "attention plan: need 0 <= R <= F-S");
    require(d_k >= 1, "attention plan: d_k must be >= 1");
    require(segment_len >= 1, "attention plan: segment_len must be >= 1");
  }
};

// Frames attended by audio segment i: a wrapped contiguous run of S frames
// starting at (i+R) mod F.
inline std::vector<int> window_indices(int i, int R, int S, int F) {
  require(F >= 1 && S >= 1 && S <= F, "window_indices: need 1 <= S <= F");
  require(R >= 0 && R <= F - S, "window_indices: need 0 <= R <= F-S");
  require(i >= 0 && i < F, "window_indices: segment index out of range");
  std::vector<int> out(S);
  for (int j = 0; j < S; ++j) out[j] = (i + R + j) % F;
  return out;
}

// Segments whose window contains frame f — the mirror image of
// window_indices, also a wrapped contiguous run of length S.
inline std::vector<int> segments_for_frame(int f, int R, int S, int F) {
  require(F >= 1 && S >= 1 && S <= F, "segments_for_frame: need 1 <= S <= F");
  require(R >= 0 && R <= F - S, "segments_for_frame: need 0 <= R <= F-S");
  require(f >= 0 && f < F, "segments_for_frame: frame index out of range");
  std::vector<int> out(S);
  for (int j = 0; j < S; ++j) out[j] = ((f - R - S + 1 + j) % F + F) % F;
  return out;
}

// Canonical (segment, frame) link set for one invocation, for symmetry
// checks between the two attention directions.
inline std::vector<std::pair<int, int>> link_set(int R, int S, int F) {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<size_t>(F) * S);
  for (int i = 0; i < F; ++i)
    for (int f : window_indices(i, R, S, F)) out.emplace_back(i, f);
  std::sort(out.begin(), out.end());
  return out;
}

// Forward-pass instrumentation: attention invocation counts by kind plus
// the realized cross-attention cost and shifts.
struct AttnStats {
  long video_spatial = 0;
  long video_temporal = 0;
  long audio_self = 0;  // stays zero: the audio branch runs no self-attention
  long cross = 0;
  long cross_key_tokens_per_segment = 0;  // realized S*H*W of the last block
  long dense_key_tokens_per_segment = 0;  // F*H*W dense equivalent
  std::vector<int> realized_shifts;
  std::vector<int> realized_dilations;  // audio-conv ladder, in build order

  void reset() { *this = AttnStats{}; }
};

namespace detail {

// Key-gather row lists over flattened token axes.
inline std::shared_ptr<std::vector<long>> audio_query_key_rows(int R, int S, int F,
                                                               long hw) {
  auto rows = std::make_shared<std::vector<long>>();
  rows->reserve(static_cast<size_t>(F) * S * hw);
  for (int i = 0; i < F; ++i)
    for (int f : window_indices(i, R, S, F))
      for (long p = 0; p < hw; ++p) rows->push_back(f * hw + p);
  return rows;
}

inline std::shared_ptr<std::vector<long>> video_query_key_rows(int R, int S, int F,
                                                               long seg) {
  auto rows = std::make_shared<std::vector<long>>();
  rows->reserve(static_cast<size_t>(F) * S * seg);
  for (int f = 0; f < F; ++f)
    for (int i : segments_for_frame(f, R, S, F))
      for (long p = 0; p < seg; ++p) rows->push_back(i * seg + p);
  return rows;
}

}  // namespace detail

// One direction of windowed cross-attention over pre-projected token
// tensors: project, attend, out-project. q/kv are (B, n, C).
template <class S>
NodeRef mma_cross(Graph<S>& g, NodeRef q_tokens, NodeRef kv_tokens, NodeRef wq,
                  NodeRef bq, NodeRef wk, NodeRef bk, NodeRef wv, NodeRef bv,
                  NodeRef wo, NodeRef bo, long heads) {
  const Shape qs = g.shape(q_tokens), ks = g.shape(kv_tokens);
  if (qs.size() != 3 || ks.size() != 3 || qs[0] != ks[0] || qs[2] != ks[2])
    throw config_error("mma_cross: expects (B, n, C) tokens with matching B, C");
  const long B = qs[0], nq = qs[1], nk = ks[1], C = qs[2];
  auto proj = [&](NodeRef t, long n, NodeRef w, NodeRef b) {
    NodeRef flat = reshape(g, t, {B * n, C});
    return reshape(g, linear(g, flat, w, b), {B, n, C});
  };
  NodeRef q = proj(q_tokens, nq, wq, bq);
  NodeRef k = proj(kv_tokens, nk, wk, bk);
  NodeRef v = proj(kv_tokens, nk, wv, bv);
  NodeRef att = attention(g, q, k, v, heads);
  return proj(att, nq, wo, bo);
}

// Parameter bundle for one RS-MMA block (two directions, separate
// projections, pre-norm affine per side).
struct RsMmaWeights {
  NodeRef gn_a_gamma, gn_a_beta, gn_v_gamma, gn_v_beta;
  NodeRef aq_w, aq_b, ak_w, ak_b, av_w, av_b, ao_w, ao_b;  // audio queries
  NodeRef vq_w, vq_b, vk_w, vk_b, vv_w, vv_b, vo_w, vo_b;  // video queries
};

// Full RS-MMA block on branch activations a (1, C, T_l) and v (F, C, H, W).
// Draws one shift R per invocation (unless fixed), shared by both
// directions, and adds each direction's output residually.
template <class S>
std::pair<NodeRef, NodeRef> rs_mma_block(Graph<S>& g, NodeRef a_feat, NodeRef v_feat,
                                         const RsMmaWeights& w, int Swin, int head_dim,
                                         bool use_norm, Rng& rng, int fixed_shift,
                                         AttnStats* stats) {
  const Shape as = g.shape(a_feat), vs = g.shape(v_feat);
  if (as.size() != 3 || as[0] != 1 || vs.size() != 4)
    throw config_error("rs_mma_block: expects audio (1,C,T) and video (F,C,H,W)");
  const long C = as[1], T = as[2];
  const long F = vs[0], H = vs[2], W = vs[3];
  if (vs[1] != C) throw config_error("rs_mma_block: channel mismatch between branches");
  if (T % F != 0)
    throw config_error("rs_mma_block: audio length not divisible by frame count");
  const long seg = T / F, hw = H * W;
  const int Fi = static_cast<int>(F);
  require(Swin >= 1 && Swin <= Fi, "rs_mma_block: need 1 <= S <= F");
  int R = fixed_shift >= 0 ? fixed_shift
                           : static_cast<int>(rng.uniform_int(0, Fi - Swin));
  AttentionPlan plan{Fi, Swin, R, static_cast<int>(head_dim), static_cast<int>(seg)};
  plan.validate();
  const long heads = C / head_dim;
  if (stats) {
    stats->cross++;
    stats->cross_key_tokens_per_segment = Swin * hw;
    stats->dense_key_tokens_per_segment = F * hw;
    stats->realized_shifts.push_back(R);
  }

  NodeRef an = use_norm ? group_norm(g, a_feat, w.gn_a_gamma, w.gn_a_beta,
                                     default_gn_groups(C))
                        : a_feat;
  NodeRef vn = use_norm ? group_norm(g, v_feat, w.gn_v_gamma, w.gn_v_beta,
                                     default_gn_groups(C))
                        : v_feat;

  // Token views: audio (F, seg, C); video (F, hw, C) with flat (F*hw, C).
  NodeRef a_tok = reshape(g, permute(g, an, {0, 2, 1}), {F, seg, C});
  NodeRef v_perm = permute(g, vn, {0, 2, 3, 1});  // (F, H, W, C)
  NodeRef v_tok = reshape(g, v_perm, {F, hw, C});

  // Audio-query direction: segment i attends its window's video tokens.
  NodeRef v_flat = reshape(g, v_perm, {F * hw, C});
  NodeRef a_keys = reshape(g, rows_gather(g, v_flat,
                                          detail::audio_query_key_rows(R, Swin, Fi, hw)),
                           {F, static_cast<long>(Swin) * hw, C});
  NodeRef a_att = mma_cross(g, a_tok, a_keys, w.aq_w, w.aq_b, w.ak_w, w.ak_b,
                            w.av_w, w.av_b, w.ao_w, w.ao_b, heads);
  NodeRef a_out = add(g, a_feat, permute(g, reshape(g, a_att, {1, T, C}), {0, 2, 1}));

  // Video-query direction: frame f attends the segments linked to it.
  NodeRef a_flat = reshape(g, a_tok, {T, C});
  NodeRef v_keys = reshape(g, rows_gather(g, a_flat,
                                          detail::video_query_key_rows(R, Swin, Fi, seg)),
                           {F, static_cast<long>(Swin) * seg, C});
  NodeRef v_att = mma_cross(g, v_tok, v_keys, w.vq_w, w.vq_b, w.vk_w, w.vk_b,
                            w.vv_w, w.vv_b, w.vo_w, w.vo_b, heads);
  NodeRef v_out =
      add(g, v_feat, permute(g, reshape(g, v_att, {F, H, W, C}), {0, 3, 1, 2}));
  return {a_out, v_out};
}

}  // namespace mmdiff
