// Closed-form optimal denoiser for a zero-mean correlated scalar pair
// (audio, video) ~ N(0, [[1, rho], [rho, 1]]). Under the forward process
// the step-t marginal is N(0, Sigma_t) with Sigma_t = abar_t*Sigma +
// (1-abar_t)*I, and the posterior-optimal eps prediction is
//   eps_hat(x, t) = sqrt(1-abar_t) * Sigma_t^{-1} x.
// Used as the reference model for sampler and guidance verification.
#pragma once

#include <array>

#include "mmdiff/diffusion.hpp"

namespace mmdiff {

class GaussianOracleModel {
 public:
  GaussianOracleModel(NoiseSchedule sched, double rho)
      : sched_(std::move(sched)), rho_(rho) {
    if (!(rho > -1.0 && rho < 1.0)) throw config_error("rho must be in (-1, 1)");
  }

  const NoiseSchedule& schedule() const { return sched_; }
  Shape audio_shape() const { return {1, 1}; }
  Shape video_shape() const { return {1, 1, 1, 1}; }

  // 2x2 inverse of Sigma_t; entries [aa, av, vv].
  std::array<double, 3> sigma_t_inv(int t) const {
    double ab = sched_.alpha_bar[t];
    double d = ab * 1.0 + (1.0 - ab);  // diagonal: abar*1 + (1-abar)
    double o = ab * rho_;              // off-diagonal
    double det = d * d - o * o;
    return {d / det, -o / det, d / det};
  }

  NoisePair<double> eps(const Tensor<double>& a, const Tensor<double>& v, int t,
                        Rng&) const {
    sched_.check_step(t);
    auto Si = sigma_t_inv(t);
    double c = sched_.sqrt_one_minus_alpha_bar(t);
    double av = a.v[0], vv = v.v[0];
    NoisePair<double> out;
    out.eps_audio = Tensor<double>({1, 1}, {c * (Si[0] * av + Si[1] * vv)});
    out.eps_video = Tensor<double>({1, 1, 1, 1}, {c * (Si[1] * av + Si[2] * vv)});
    return out;
  }

  // Guided forward: also returns the gradient of
  //   L = sum((mu_sub - target)^2)
  // w.r.t. the free-modality input, where mu_sub is the reverse mean of the
  // substituted modality computed with the caller's coefficients
  // (mu = inv_sqrt_alpha * (x - eps_coef * eps_hat)).
  struct Guided {
    NoisePair<double> eps;
    Tensor<double> grad_free;
  };

  Guided guided_eps(const Tensor<double>& a, const Tensor<double>& v, int t,
                    double eps_coef, double inv_sqrt_alpha,
                    const Tensor<double>& target_sub, bool audio_free, Rng& rng) const {
    Guided out;
    out.eps = eps(a, v, t, rng);
    auto Si = sigma_t_inv(t);
    double c = sched_.sqrt_one_minus_alpha_bar(t);
    if (audio_free) {
      // mu_v depends on the audio input through eps_v's cross term.
      double mu_v = inv_sqrt_alpha * (v.v[0] - eps_coef * out.eps.eps_video.v[0]);
      double dmu_da = -inv_sqrt_alpha * eps_coef * c * Si[1];
      out.grad_free =
          Tensor<double>({1, 1}, {2.0 * (mu_v - target_sub.v[0]) * dmu_da});
    } else {
      double mu_a = inv_sqrt_alpha * (a.v[0] - eps_coef * out.eps.eps_audio.v[0]);
      double dmu_dv = -inv_sqrt_alpha * eps_coef * c * Si[1];
      out.grad_free = Tensor<double>(
          {1, 1, 1, 1}, {2.0 * (mu_a - target_sub.v[0]) * dmu_dv});
    }
    return out;
  }

 private:
  NoiseSchedule sched_;
  double rho_;
};

}  // namespace mmdiff
