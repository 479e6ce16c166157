// Noise schedule: per-step variances, cumulative signal fractions, and the
// fixed reverse variances, plus uniform strided sub-schedules for fast
// deterministic sampling.
#pragma once

#include <cmath>
#include <vector>

#include "mmdiff/core.hpp"

namespace mmdiff {

enum class SigmaMode { beta, beta_tilde };

// Arrays are indexed by step t in [1, T]; index 0 is the clean-data
// convention slot (beta[0] = 0, alpha_bar[0] = 1).
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;       // beta[t], t in [0, T]
  std::vector<double> alpha;      // 1 - beta[t]
  std::vector<double> alpha_bar;  // prod_{s<=t} alpha[s]
  std::vector<double> sigma2;     // fixed reverse variance at step t
  SigmaMode sigma_mode = SigmaMode::beta;

  double sqrt_alpha_bar(int t) const { return std::sqrt(alpha_bar[t]); }
  double sqrt_one_minus_alpha_bar(int t) const { return std::sqrt(1.0 - alpha_bar[t]); }

  void check_step(int t) const {
    if (t < 1 || t > T) throw config_error("diffusion step out of range");
  }
};

namespace detail {
inline void finish_schedule(NoiseSchedule& s) {
  int T = s.T;
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  s.sigma2.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double b = s.beta[t];
    if (!(b > 0.0 && b < 1.0) || !std::isfinite(b))
      throw config_error("schedule beta out of (0,1) at step " + std::to_string(t));
    s.alpha[t] = 1.0 - b;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    if (t >= 2 && !(s.alpha_bar[t] < s.alpha_bar[t - 1]))
      throw config_error("alpha_bar not strictly decreasing");
  }
  for (int t = 1; t <= T; ++t) {
    if (s.sigma_mode == SigmaMode::beta) {
      s.sigma2[t] = s.beta[t];
    } else {
      // Posterior variance (1 - abar_{t-1}) / (1 - abar_t) * beta_t.
      s.sigma2[t] = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * s.beta[t];
    }
  }
}
}  // namespace detail

inline NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end,
                                           SigmaMode mode = SigmaMode::beta) {
  if (T < 1) throw config_error("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw config_error("schedule betas must satisfy 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.sigma_mode = mode;
  s.beta.assign(T + 1, 0.0);
  for (int t = 1; t <= T; ++t) {
    double frac = (T == 1) ? 0.0 : static_cast<double>(t - 1) / (T - 1);
    s.beta[t] = beta_start + (beta_end - beta_start) * frac;
  }
  detail::finish_schedule(s);
  return s;
}

// Uniform step subset for strided sampling. The sub-schedule's step k covers
// the original interval (orig_t[k-1], orig_t[k]]; its effective beta is
// 1 - abar(orig_t[k]) / abar(orig_t[k-1]), so running the standard reverse
// update on the sub-schedule while querying the model at orig_t[k] gives the
// strided sampler. stride=1 reproduces the base schedule exactly.
struct StridedSchedule {
  NoiseSchedule sub;
  std::vector<int> orig_t;  // orig_t[k] for k in [0, K], orig_t[0] = 0
};

inline StridedSchedule make_strided(const NoiseSchedule& base, int stride) {
  if (stride < 1) throw config_error("stride must be >= 1");
  StridedSchedule out;
  if (stride == 1) {  // exact identity, no round trip through ratios
    out.sub = base;
    out.orig_t.resize(base.T + 1);
    for (int t = 0; t <= base.T; ++t) out.orig_t[t] = t;
    return out;
  }
  out.orig_t.push_back(0);
  for (int t = stride; t <= base.T; t += stride) out.orig_t.push_back(t);
  if (out.orig_t.back() != base.T) out.orig_t.push_back(base.T);
  int K = static_cast<int>(out.orig_t.size()) - 1;
  out.sub.T = K;
  out.sub.sigma_mode = base.sigma_mode;
  out.sub.beta.assign(K + 1, 0.0);
  for (int k = 1; k <= K; ++k) {
    double ratio = base.alpha_bar[out.orig_t[k]] / base.alpha_bar[out.orig_t[k - 1]];
    out.sub.beta[k] = 1.0 - ratio;
  }
  detail::finish_schedule(out.sub);
  return out;
}

}  // namespace mmdiff
