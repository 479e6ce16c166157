// Zero-shot conditional sampling on an unconditionally trained model:
// replacement (substitute the forward-noised condition every step, update
// only the free modality) and gradient guidance (replacement plus an
// input-gradient correction weighted by lambda).
//
// Randomness discipline: the caller's rng seeds two derived streams —
// "cond" feeds only the condition substitutions, "main" feeds everything
// else (free init, reverse noise, model internals). With lambda = 0 the
// gradient method consumes draws identically to replacement, so their
// outputs are bit-identical under one seed.
#pragma once

#include "mmdiff/diffusion.hpp"

namespace mmdiff {

// Core loop in normalized space. `cond` is the clean condition for the
// fixed modality; the free one is generated. Returns the final state
// (free sample + clean condition) at t = 0.
// Model concept: eps(...), guided_eps(...) as in GaussianOracleModel,
// plus schedule()/audio_shape()/video_shape().
template <class S, class Model>
JointState<S> conditional_sample_state(Model& model, const Tensor<S>& cond,
                                       const GuidanceConfig& cfg,
                                       const NoiseSchedule& sched, Rng& rng) {
  cfg.validate();
  const bool audio_free = cfg.direction == GuideDirection::audio_given_video;
  Rng rng_main = rng.derive(0x6d61696e);  // free modality + model internals
  Rng rng_cond = rng.derive(0x636f6e64);  // substitution draws only

  const Shape want = audio_free ? model.video_shape() : model.audio_shape();
  if (cond.shape != want)
    throw config_error("condition shape " + shape_str(cond.shape) +
                       " does not match model " + shape_str(want));

  StridedSchedule st = make_strided(sched, cfg.stride);
  const int K = st.sub.T;

  // Free modality starts from pure noise.
  Tensor<S> free_x(audio_free ? model.audio_shape() : model.video_shape());
  rng_main.fill_normal(free_x.data(), free_x.numel());

  auto substitute = [&](int orig_t) {
    if (orig_t == 0) return cond;  // abar_0 = 1: the clean condition itself
    Tensor<S> e(cond.shape);
    rng_cond.fill_normal(e.data(), e.numel());
    return forward_marginal(cond, orig_t, e, sched);
  };
  Tensor<S> sub_curr = substitute(st.orig_t[K]);

  for (int k = K; k >= 1; --k) {
    const int t_model = st.orig_t[k];
    const double eps_coef = st.sub.beta[k] / st.sub.sqrt_one_minus_alpha_bar(k);
    const double isa = 1.0 / std::sqrt(st.sub.alpha[k]);
    // Next substitution is drawn before the reverse noise (pinned order).
    Tensor<S> sub_next = substitute(st.orig_t[k - 1]);

    Tensor<S> eps_free, grad_free;
    const Tensor<S>& a_in = audio_free ? free_x : sub_curr;
    const Tensor<S>& v_in = audio_free ? sub_curr : free_x;
    if (cfg.method == GuideMethod::gradient) {
      auto ge = model.guided_eps(a_in, v_in, t_model, eps_coef, isa, sub_next,
                                 audio_free, rng_main);
      eps_free = audio_free ? std::move(ge.eps.eps_audio) : std::move(ge.eps.eps_video);
      grad_free = std::move(ge.grad_free);
      if (!all_finite(grad_free.v))
        throw runtime_fault("guidance gradient diverged (non-finite)");
    } else {
      NoisePair<S> pred = model.eps(a_in, v_in, t_model, rng_main);
      eps_free = audio_free ? std::move(pred.eps_audio) : std::move(pred.eps_video);
    }

    // Free-modality ancestral update with the sub-schedule coefficients.
    const S sig = static_cast<S>(std::sqrt(st.sub.sigma2[k]));
    Tensor<S> next(free_x.shape);
    for (long i = 0; i < next.numel(); ++i) {
      S mu = static_cast<S>(isa) *
             (free_x.v[i] - static_cast<S>(eps_coef) * eps_free.v[i]);
      next.v[i] = (k > 1) ? mu + sig * static_cast<S>(rng_main.normal()) : mu;
    }
    if (cfg.method == GuideMethod::gradient) {
      // Correction weight uses the target step's noise level; it vanishes
      // at the final step where abar_0 = 1.
      const S w = static_cast<S>(cfg.lambda_guide *
                                 st.sub.sqrt_one_minus_alpha_bar(k - 1));
      for (long i = 0; i < next.numel(); ++i) next.v[i] -= w * grad_free.v[i];
    }
    if (!all_finite(next.v))
      throw runtime_fault("conditional sampling diverged at step " +
                          std::to_string(t_model));
    free_x = std::move(next);
    sub_curr = std::move(sub_next);
  }

  JointState<S> out;
  out.audio = audio_free ? std::move(free_x) : std::move(sub_curr);
  out.video = audio_free ? std::move(sub_curr) : std::move(free_x);
  out.t = 0;
  return out;
}

// Media-level wrapper: normalizes the condition, runs the loop, and maps
// the final state back to media ranges.
template <class S, class Model>
MediaPair conditional_sample(Model& model, const MediaPair& condition,
                             const GuidanceConfig& cfg, const NoiseSchedule& sched,
                             Rng& rng, double fps, double sr) {
  const bool audio_free = cfg.direction == GuideDirection::audio_given_video;
  Tensor<S> cond = audio_free ? normalize_video<S>(condition.video)
                              : normalize_audio<S>(condition.audio);
  JointState<S> st = conditional_sample_state<S>(model, cond, cfg, sched, rng);
  MediaPair out;
  out.audio = denormalize_audio(st.audio);
  out.video = denormalize_video(st.video);
  out.fps = fps;
  out.sr = sr;
  return out;
}

}  // namespace mmdiff
