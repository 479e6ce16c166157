// Batched multi-head scaled dot-product attention. Inputs are token
// matrices (B, n, C); the op loops batches and heads internally so one
// graph node covers e.g. all frames of a spatial attention layer. The
// softmax matrices are kept for the backward pass.
#pragma once

#include <Eigen/Dense>

#include "mmdiff/graph.hpp"
#include "mmdiff/graph_linalg.hpp"

namespace mmdiff {

namespace detail {

// Copy head slice h of (n, C) token rows into a contiguous (n, dh) matrix.
template <class S>
void take_head(const S* tok, long n, long C, long h, long dh, S* out) {
  for (long i = 0; i < n; ++i)
    std::copy(tok + i * C + h * dh, tok + i * C + (h + 1) * dh, out + i * dh);
}

template <class S>
void put_head_add(const S* in, long n, long C, long h, long dh, S* tok) {
  for (long i = 0; i < n; ++i)
    for (long d = 0; d < dh; ++d) tok[i * C + h * dh + d] += in[i * dh + d];
}

}  // namespace detail

// q: (B, nq, C), k: (B, nk, C), v: (B, nk, C) -> (B, nq, C).
// Rows of each softmax sum to one; scale is 1/sqrt(C/heads).
template <class S>
NodeRef attention(Graph<S>& g, NodeRef q, NodeRef k, NodeRef v, long heads) {
  const Shape &qs = g.shape(q), &ks = g.shape(k), &vs = g.shape(v);
  if (qs.size() != 3 || ks.size() != 3 || vs.size() != 3)
    throw config_error("attention: expects (B, n, C) token tensors");
  long B = qs[0], nq = qs[1], C = qs[2], nk = ks[1];
  if (ks[0] != B || vs[0] != B || ks[2] != C || vs[2] != C || vs[1] != nk)
    throw config_error("attention: inconsistent token shapes");
  if (C % heads != 0) throw config_error("attention: channels not divisible by heads");
  long dh = C / heads;
  double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  bool ng = g.needs_grad(q) || g.needs_grad(k) || g.needs_grad(v);
  NodeRef r = g.new_node({B, nq, C}, ng);
  auto P = std::make_shared<std::vector<S>>(B * heads * nq * nk);

  {
    std::vector<S> Qh(nq * dh), Kh(nk * dh), Vh(nk * dh), Oh(nq * dh);
    for (long b = 0; b < B; ++b) {
      const S* qb = g.val(q) + b * nq * C;
      const S* kb = g.val(k) + b * nk * C;
      const S* vb = g.val(v) + b * nk * C;
      S* rb = g.val(r) + b * nq * C;
      for (long h = 0; h < heads; ++h) {
        detail::take_head(qb, nq, C, h, dh, Qh.data());
        detail::take_head(kb, nk, C, h, dh, Kh.data());
        detail::take_head(vb, nk, C, h, dh, Vh.data());
        S* Pm = P->data() + (b * heads + h) * nq * nk;
        MapM<S> Pmap(Pm, nq, nk);
        CMapM<S> Q(Qh.data(), nq, dh), K(Kh.data(), nk, dh), V(Vh.data(), nk, dh);
        Pmap.noalias() = Q * K.transpose();
        Pmap *= static_cast<S>(sc);
        for (long i = 0; i < nq; ++i) {
          S* row = Pm + i * nk;
          S mx = row[0];
          for (long j = 1; j < nk; ++j) mx = std::max(mx, row[j]);
          double z = 0;
          for (long j = 0; j < nk; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
          }
          S izn = static_cast<S>(1.0 / z);
          for (long j = 0; j < nk; ++j) row[j] *= izn;
        }
        MapM<S> O(Oh.data(), nq, dh);
        O.noalias() = Pmap * V;
        for (long i = 0; i < nq; ++i)
          std::copy(Oh.data() + i * dh, Oh.data() + (i + 1) * dh,
                    rb + i * C + h * dh);
      }
    }
  }

  if (ng)
    g.node(r).back = [&g, q, k, v, r, P, B, nq, nk, C, heads, dh, sc] {
      std::vector<S> Qh(nq * dh), Kh(nk * dh), Vh(nk * dh);
      std::vector<S> dOh(nq * dh), dP(nq * nk), dS(nq * nk), tmp(nq * dh),
          tmpk(nk * dh);
      for (long b = 0; b < B; ++b) {
        const S* qb = g.val(q) + b * nq * C;
        const S* kb = g.val(k) + b * nk * C;
        const S* vb = g.val(v) + b * nk * C;
        const S* grb = g.grad(r) + b * nq * C;
        for (long h = 0; h < heads; ++h) {
          detail::take_head(qb, nq, C, h, dh, Qh.data());
          detail::take_head(kb, nk, C, h, dh, Kh.data());
          detail::take_head(vb, nk, C, h, dh, Vh.data());
          detail::take_head(grb, nq, C, h, dh, dOh.data());
          const S* Pm = P->data() + (b * heads + h) * nq * nk;
          CMapM<S> Pmap(Pm, nq, nk), Q(Qh.data(), nq, dh), K(Kh.data(), nk, dh),
              V(Vh.data(), nk, dh), dO(dOh.data(), nq, dh);
          if (g.needs_grad(v)) {
            MapM<S> dV(tmpk.data(), nk, dh);
            dV.noalias() = Pmap.transpose() * dO;
            detail::put_head_add(tmpk.data(), nk, C, h, dh, g.grad(v) + b * nk * C);
          }
          // dS = P .* (dP - rowsum(dP .* P)), dP = dO V^T.
          MapM<S> dPm(dP.data(), nq, nk);
          dPm.noalias() = dO * V.transpose();
          for (long i = 0; i < nq; ++i) {
            double rs = 0;
            const S* pi = Pm + i * nk;
            S* dpi = dP.data() + i * nk;
            for (long j = 0; j < nk; ++j) rs += static_cast<double>(dpi[j]) * pi[j];
            S* dsi = dS.data() + i * nk;
            for (long j = 0; j < nk; ++j)
              dsi[j] = pi[j] * (dpi[j] - static_cast<S>(rs));
          }
          CMapM<S> dSm(dS.data(), nq, nk);
          if (g.needs_grad(q)) {
            MapM<S> dQ(tmp.data(), nq, dh);
            dQ.noalias() = dSm * K;
            dQ *= static_cast<S>(sc);
            detail::put_head_add(tmp.data(), nq, C, h, dh, g.grad(q) + b * nq * C);
          }
          if (g.needs_grad(k)) {
            MapM<S> dK(tmpk.data(), nk, dh);
            dK.noalias() = dSm.transpose() * Q;
            dK *= static_cast<S>(sc);
            detail::put_head_add(tmpk.data(), nk, C, h, dh, g.grad(k) + b * nk * C);
          }
        }
      }
    };
  return r;
}

}  // namespace mmdiff
