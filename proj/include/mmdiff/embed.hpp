// Sinusoidal step encoding: [sin(t*w_k), cos(t*w_k)] with geometric
// frequencies from 1 down to 1/10000, interleaved sin/cos per frequency.
#pragma once

#include <cmath>
#include <vector>

#include "mmdiff/core.hpp"

namespace mmdiff {

inline std::vector<double> sinusoidal_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0)
    throw config_error("embedding dim must be even and >= 2");
  if (t < 0) throw config_error("embedding step must be >= 0");
  const int half = dim / 2;
  std::vector<double> out(dim);
  for (int k = 0; k < half; ++k) {
    // w_k spans [1, 1e-4]; the slowest frequency keeps the encoding
    // injective over step ranges up to ~10^4.
    double w = (half == 1) ? 1.0
                           : std::exp(-std::log(10000.0) * k / (half - 1));
    out[2 * k] = std::sin(t * w);
    out[2 * k + 1] = std::cos(t * w);
  }
  return out;
}

}  // namespace mmdiff
