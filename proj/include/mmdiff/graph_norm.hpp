// Group normalization over (B, C, rest...): statistics are taken per
// channel group across the batch axis and all trailing dims, i.e. per
// forward example (the graph always sees one example at a time).
#pragma once

#include "mmdiff/graph.hpp"

namespace mmdiff {

template <class S>
NodeRef group_norm(Graph<S>& g, NodeRef x, NodeRef gamma, NodeRef beta, long groups,
                   double eps = 1e-5) {
  const Shape& xs = g.shape(x);
  if (xs.size() < 2) throw config_error("group_norm: needs (B, C, ...)");
  long B = xs[0], C = xs[1], R = g.numel(x) / (B * C);
  if (C % groups != 0) throw config_error("group_norm: channels not divisible by groups");
  if (g.shape(gamma) != Shape{C} || g.shape(beta) != Shape{C})
    throw config_error("group_norm: gamma/beta must have C entries");
  long cg = C / groups;
  long n_per_group = B * cg * R;
  bool ng = g.needs_grad(x) || g.needs_grad(gamma) || g.needs_grad(beta);
  NodeRef r = g.new_node(xs, ng);
  auto mean = std::make_shared<std::vector<S>>(groups);
  auto inv = std::make_shared<std::vector<S>>(groups);

  const S *px = g.val(x), *pg = g.val(gamma), *pb = g.val(beta);
  S* pr = g.val(r);
  for (long j = 0; j < groups; ++j) {
    double acc = 0, acc2 = 0;
    for (long b = 0; b < B; ++b)
      for (long c = j * cg; c < (j + 1) * cg; ++c) {
        const S* xi = px + (b * C + c) * R;
        for (long i = 0; i < R; ++i) {
          double v = xi[i];
          acc += v;
          acc2 += v * v;
        }
      }
    double mu = acc / n_per_group;
    double var = acc2 / n_per_group - mu * mu;
    double iv = 1.0 / std::sqrt(var + eps);
    (*mean)[j] = static_cast<S>(mu);
    (*inv)[j] = static_cast<S>(iv);
    for (long b = 0; b < B; ++b)
      for (long c = j * cg; c < (j + 1) * cg; ++c) {
        const S* xi = px + (b * C + c) * R;
        S* ri = pr + (b * C + c) * R;
        S ga = pg[c], be = pb[c], m = (*mean)[j], ivs = (*inv)[j];
        for (long i = 0; i < R; ++i) ri[i] = (xi[i] - m) * ivs * ga + be;
      }
  }

  if (ng)
    g.node(r).back = [&g, x, gamma, beta, r, mean, inv, B, C, R, groups, cg,
                      n_per_group] {
      const S* gr = g.grad(r);
      const S* px = g.val(x);
      const S* pg = g.val(gamma);
      for (long j = 0; j < groups; ++j) {
        S m = (*mean)[j], iv = (*inv)[j];
        // Accumulate the two reduction terms of the standard groupnorm
        // backward: sum(dxhat) and sum(dxhat * xhat) over the group.
        double s1 = 0, s2 = 0;
        for (long b = 0; b < B; ++b)
          for (long c = j * cg; c < (j + 1) * cg; ++c) {
            const S* gi = gr + (b * C + c) * R;
            const S* xi = px + (b * C + c) * R;
            double ga = pg[c];
            for (long i = 0; i < R; ++i) {
              double dxh = gi[i] * ga;
              double xh = (xi[i] - m) * iv;
              s1 += dxh;
              s2 += dxh * xh;
            }
          }
        if (g.needs_grad(x)) {
          S* gx = g.grad(x);
          double invn = 1.0 / n_per_group;
          for (long b = 0; b < B; ++b)
            for (long c = j * cg; c < (j + 1) * cg; ++c) {
              const S* gi = gr + (b * C + c) * R;
              const S* xi = px + (b * C + c) * R;
              S* ri = gx + (b * C + c) * R;
              double ga = pg[c];
              for (long i = 0; i < R; ++i) {
                double dxh = gi[i] * ga;
                double xh = (xi[i] - m) * iv;
                ri[i] += static_cast<S>(iv * (dxh - invn * (s1 + xh * s2)));
              }
            }
        }
        if (g.needs_grad(gamma) || g.needs_grad(beta)) {
          S* gga = g.needs_grad(gamma) ? g.grad(gamma) : nullptr;
          S* gbe = g.needs_grad(beta) ? g.grad(beta) : nullptr;
          for (long c = j * cg; c < (j + 1) * cg; ++c) {
            double ag = 0, ab = 0;
            for (long b = 0; b < B; ++b) {
              const S* gi = gr + (b * C + c) * R;
              const S* xi = px + (b * C + c) * R;
              for (long i = 0; i < R; ++i) {
                ag += static_cast<double>(gi[i]) * ((xi[i] - m) * iv);
                ab += gi[i];
              }
            }
            if (gga) gga[c] += static_cast<S>(ag);
            if (gbe) gbe[c] += static_cast<S>(ab);
          }
        }
      }
    };
  return r;
}

inline long default_gn_groups(long channels) {
  long g = std::min<long>(32, channels);
  while (channels % g != 0) --g;
  return g;
}

}  // namespace mmdiff
