// Modality-agnostic diffusion machinery: closed-form forward noising,
// single Markov steps, the eps-prediction loss, the reverse update, and
// the full joint ancestral sampler (with optional uniform striding).
//
// Draw-order convention, pinned for reproducibility: whenever both
// modalities consume randomness in one operation, audio draws first.
#pragma once

#include "mmdiff/media.hpp"
#include "mmdiff/rng.hpp"
#include "mmdiff/schedule.hpp"
#include "mmdiff/tensor.hpp"

namespace mmdiff {

template <class S>
struct JointState {
  Tensor<S> audio;  // (C_a, T_a)
  Tensor<S> video;  // (F, C, H, W)
  int t = 0;        // shared clock for both modalities
};

template <class S>
struct NoisePair {
  Tensor<S> eps_audio;
  Tensor<S> eps_video;
};

struct LossConfig {
  // Per-step loss weight; default constant 1 (the reweighted objective).
  std::function<double(int)> lambda_t = [](int) { return 1.0; };
};

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <class S>
Tensor<S> forward_marginal(const Tensor<S>& x0, int t, const Tensor<S>& eps,
                           const NoiseSchedule& sched) {
  sched.check_step(t);
  check_same_shape(x0, eps, "forward_marginal");
  S a = static_cast<S>(sched.sqrt_alpha_bar(t));
  S b = static_cast<S>(sched.sqrt_one_minus_alpha_bar(t));
  Tensor<S> out(x0.shape);
  for (long i = 0; i < x0.numel(); ++i) out.v[i] = a * x0.v[i] + b * eps.v[i];
  return out;
}

// One Markov step: x_t ~ N(sqrt(1-beta_t) x_{t-1}, beta_t I).
template <class S>
Tensor<S> forward_step(const Tensor<S>& x_prev, int t, const NoiseSchedule& sched,
                       Rng& rng) {
  sched.check_step(t);
  S a = static_cast<S>(std::sqrt(sched.alpha[t]));
  S b = static_cast<S>(std::sqrt(sched.beta[t]));
  Tensor<S> out(x_prev.shape);
  for (long i = 0; i < x_prev.numel(); ++i)
    out.v[i] = a * x_prev.v[i] + b * static_cast<S>(rng.normal());
  return out;
}

// Noise both modalities of a clean pair at step t with independent draws
// (audio eps first), returning the noisy state and the targets.
template <class S>
struct NoisedPair {
  JointState<S> state;
  NoisePair<S> eps;
};

template <class S>
NoisedPair<S> noise_pair(const Tensor<S>& audio0, const Tensor<S>& video0, int t,
                         const NoiseSchedule& sched, Rng& rng) {
  NoisedPair<S> out;
  out.eps.eps_audio = Tensor<S>(audio0.shape);
  rng.fill_normal(out.eps.eps_audio.data(), out.eps.eps_audio.numel());
  out.eps.eps_video = Tensor<S>(video0.shape);
  rng.fill_normal(out.eps.eps_video.data(), out.eps.eps_video.numel());
  out.state.audio = forward_marginal(audio0, t, out.eps.eps_audio, sched);
  out.state.video = forward_marginal(video0, t, out.eps.eps_video, sched);
  out.state.t = t;
  return out;
}

// Convenience hook so eps_loss works with any model exposing a schedule.
template <class Model>
const NoiseSchedule& sched_of(Model& m) {
  return m.schedule();
}

// lambda(t) * (per-element MSE of predicted vs true eps, audio + video).
// Model concept: NoisePair<S> eps(audio, video, t, rng).
template <class S, class Model>
double eps_loss(Model& model, const MediaPair& pair0, int t, Rng& rng,
                const LossConfig& cfg = {}) {
  double lam = cfg.lambda_t(t);
  if (!(lam > 0)) throw config_error("loss weight lambda_t must be positive");
  Tensor<S> a0 = normalize_audio<S>(pair0.audio);
  Tensor<S> v0 = normalize_video<S>(pair0.video);
  NoisedPair<S> np = noise_pair(a0, v0, t, sched_of(model), rng);
  NoisePair<S> pred = model.eps(np.state.audio, np.state.video, t, rng);
  check_same_shape(pred.eps_audio, np.eps.eps_audio, "eps_loss audio");
  check_same_shape(pred.eps_video, np.eps.eps_video, "eps_loss video");
  double mse_a = 0, mse_v = 0;
  for (long i = 0; i < np.eps.eps_audio.numel(); ++i) {
    double d = static_cast<double>(pred.eps_audio.v[i]) - np.eps.eps_audio.v[i];
    mse_a += d * d;
  }
  mse_a /= np.eps.eps_audio.numel();
  for (long i = 0; i < np.eps.eps_video.numel(); ++i) {
    double d = static_cast<double>(pred.eps_video.v[i]) - np.eps.eps_video.v[i];
    mse_v += d * d;
  }
  mse_v /= np.eps.eps_video.numel();
  double loss = lam * (mse_a + mse_v);
  if (!std::isfinite(loss)) throw runtime_fault("eps_loss diverged (non-finite)");
  return loss;
}

// Posterior-mean update from the eps prediction; noise added for t > 1.
// Decrements the shared clock for both modalities at once.
template <class S>
JointState<S> reverse_step(const NoisePair<S>& eps_pred, const JointState<S>& state,
                           const NoiseSchedule& sched, Rng& rng) {
  int t = state.t;
  if (t < 1) throw config_error("reverse_step: nothing to reverse at t=0");
  sched.check_step(t);
  check_same_shape(eps_pred.eps_audio, state.audio, "reverse_step audio");
  check_same_shape(eps_pred.eps_video, state.video, "reverse_step video");
  S inv_sqrt_alpha = static_cast<S>(1.0 / std::sqrt(sched.alpha[t]));
  S coef = static_cast<S>(sched.beta[t] / sched.sqrt_one_minus_alpha_bar(t));
  S sig = static_cast<S>(std::sqrt(sched.sigma2[t]));
  JointState<S> out;
  out.t = t - 1;
  out.audio = Tensor<S>(state.audio.shape);
  for (long i = 0; i < out.audio.numel(); ++i) {
    S mu = inv_sqrt_alpha * (state.audio.v[i] - coef * eps_pred.eps_audio.v[i]);
    out.audio.v[i] = (t > 1) ? mu + sig * static_cast<S>(rng.normal()) : mu;
  }
  out.video = Tensor<S>(state.video.shape);
  for (long i = 0; i < out.video.numel(); ++i) {
    S mu = inv_sqrt_alpha * (state.video.v[i] - coef * eps_pred.eps_video.v[i]);
    out.video.v[i] = (t > 1) ? mu + sig * static_cast<S>(rng.normal()) : mu;
  }
  return out;
}

// Full ancestral loop from pure noise, visiting every stride-th step of the
// schedule; the model is always conditioned on the original step index.
// Model concept additionally provides audio_shape() and video_shape().
template <class S, class Model>
JointState<S> sample_joint_state(Model& model, const NoiseSchedule& sched, Rng& rng,
                                 int stride = 1) {
  StridedSchedule st = make_strided(sched, stride);
  JointState<S> state;
  state.audio = Tensor<S>(model.audio_shape());
  rng.fill_normal(state.audio.data(), state.audio.numel());
  state.video = Tensor<S>(model.video_shape());
  rng.fill_normal(state.video.data(), state.video.numel());
  state.t = st.sub.T;
  for (int k = st.sub.T; k >= 1; --k) {
    NoisePair<S> pred = model.eps(state.audio, state.video, st.orig_t[k], rng);
    state = reverse_step(pred, state, st.sub, rng);
    if (!all_finite(state.audio.v) || !all_finite(state.video.v))
      throw runtime_fault("sampling diverged (non-finite state) at step " +
                          std::to_string(st.orig_t[k]));
  }
  return state;
}

template <class S, class Model>
MediaPair sample_joint(Model& model, const NoiseSchedule& sched, Rng& rng,
                       int stride, double fps, double sr) {
  JointState<S> state = sample_joint_state<S>(model, sched, rng, stride);
  MediaPair out;
  out.video = denormalize_video(state.video);
  out.audio = denormalize_audio(state.audio);
  out.fps = fps;
  out.sr = sr;
  return out;
}

}  // namespace mmdiff
