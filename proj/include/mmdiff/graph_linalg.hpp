// GEMM-backed graph ops: dense linear layers and 1D/2D convolutions via
// im2col, plus nearest-neighbor upsampling. Convolutions keep their im2col
// buffer alive for the backward pass.
#pragma once

#include <Eigen/Dense>

#include "mmdiff/graph.hpp"

namespace mmdiff {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MapM = Eigen::Map<MatRM<S>>;
template <class S>
using CMapM = Eigen::Map<const MatRM<S>>;

// x: (n, din), w: (dout, din), bias: (dout) or -1.
template <class S>
NodeRef linear(Graph<S>& g, NodeRef x, NodeRef w, NodeRef bias) {
  const Shape &xs = g.shape(x), &ws = g.shape(w);
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
    throw config_error("linear: expects x (n,din), w (dout,din)");
  long n = xs[0], din = xs[1], dout = ws[0];
  if (bias >= 0 && g.shape(bias) != Shape{dout})
    throw config_error("linear: bias shape mismatch");
  bool ng = g.needs_grad(x) || g.needs_grad(w) || (bias >= 0 && g.needs_grad(bias));
  NodeRef r = g.new_node({n, dout}, ng);
  {
    CMapM<S> X(g.val(x), n, din), W(g.val(w), dout, din);
    MapM<S> Y(g.val(r), n, dout);
    Y.noalias() = X * W.transpose();
    if (bias >= 0) {
      CMapM<S> B(g.val(bias), 1, dout);
      Y.rowwise() += B.row(0);
    }
  }
  if (ng)
    g.node(r).back = [&g, x, w, bias, r, n, din, dout] {
      CMapM<S> dY(g.grad(r), n, dout);
      if (g.needs_grad(x)) {
        CMapM<S> W(g.val(w), dout, din);
        MapM<S> dX(g.grad(x), n, din);
        dX.noalias() += dY * W;
      }
      if (g.needs_grad(w)) {
        CMapM<S> X(g.val(x), n, din);
        MapM<S> dW(g.grad(w), dout, din);
        dW.noalias() += dY.transpose() * X;
      }
      if (bias >= 0 && g.needs_grad(bias)) {
        // Fixed-order accumulation: Eigen's redux splits on runtime pointer
        // alignment, which breaks run-to-run bit determinism.
        S* db = g.grad(bias);
        const S* dy = g.grad(r);
        for (long i = 0; i < n; ++i)
          for (long j = 0; j < dout; ++j) db[j] += dy[i * dout + j];
      }
    };
  return r;
}

namespace detail {

// Column index layout: row (ci*k + kk), column (b*Lout + l).
template <class S>
void im2col_1d(const S* x, long B, long Cin, long L, long k, long stride, long pad,
               long dil, long Lout, S* col) {
  for (long ci = 0; ci < Cin; ++ci)
    for (long kk = 0; kk < k; ++kk) {
      S* dst = col + (ci * k + kk) * (B * Lout);
      for (long b = 0; b < B; ++b) {
        const S* src = x + (b * Cin + ci) * L;
        for (long l = 0; l < Lout; ++l) {
          long p = l * stride - pad + kk * dil;
          dst[b * Lout + l] = (p >= 0 && p < L) ? src[p] : S(0);
        }
      }
    }
}

template <class S>
void col2im_1d(const S* col, long B, long Cin, long L, long k, long stride, long pad,
               long dil, long Lout, S* dx) {
  for (long ci = 0; ci < Cin; ++ci)
    for (long kk = 0; kk < k; ++kk) {
      const S* src = col + (ci * k + kk) * (B * Lout);
      for (long b = 0; b < B; ++b) {
        S* dst = dx + (b * Cin + ci) * L;
        for (long l = 0; l < Lout; ++l) {
          long p = l * stride - pad + kk * dil;
          if (p >= 0 && p < L) dst[p] += src[b * Lout + l];
        }
      }
    }
}

// Row (ci*kh*kw + ki*kw + kj), column (b*Hout*Wout + i*Wout + j).
template <class S>
void im2col_2d(const S* x, long B, long Cin, long H, long W, long k, long stride,
               long pad, long Hout, long Wout, S* col) {
  long HW = Hout * Wout;
  for (long ci = 0; ci < Cin; ++ci)
    for (long ki = 0; ki < k; ++ki)
      for (long kj = 0; kj < k; ++kj) {
        S* dst = col + ((ci * k + ki) * k + kj) * (B * HW);
        for (long b = 0; b < B; ++b) {
          const S* src = x + (b * Cin + ci) * H * W;
          for (long i = 0; i < Hout; ++i) {
            long pi = i * stride - pad + ki;
            S* drow = dst + b * HW + i * Wout;
            if (pi < 0 || pi >= H) {
              for (long j = 0; j < Wout; ++j) drow[j] = S(0);
              continue;
            }
            for (long j = 0; j < Wout; ++j) {
              long pj = j * stride - pad + kj;
              drow[j] = (pj >= 0 && pj < W) ? src[pi * W + pj] : S(0);
            }
          }
        }
      }
}

template <class S>
void col2im_2d(const S* col, long B, long Cin, long H, long W, long k, long stride,
               long pad, long Hout, long Wout, S* dx) {
  long HW = Hout * Wout;
  for (long ci = 0; ci < Cin; ++ci)
    for (long ki = 0; ki < k; ++ki)
      for (long kj = 0; kj < k; ++kj) {
        const S* src = col + ((ci * k + ki) * k + kj) * (B * HW);
        for (long b = 0; b < B; ++b) {
          S* dst = dx + (b * Cin + ci) * H * W;
          for (long i = 0; i < Hout; ++i) {
            long pi = i * stride - pad + ki;
            if (pi < 0 || pi >= H) continue;
            const S* srow = src + b * HW + i * Wout;
            for (long j = 0; j < Wout; ++j) {
              long pj = j * stride - pad + kj;
              if (pj >= 0 && pj < W) dst[pi * W + pj] += srow[j];
            }
          }
        }
      }
}

// (Cout, B*Lspatial) GEMM result scattered into (B, Cout, Lspatial) layout.
template <class S>
void scatter_bc(const S* ymat, long B, long Cout, long Lsp, const S* bias, S* out) {
  for (long co = 0; co < Cout; ++co) {
    S bb = bias ? bias[co] : S(0);
    const S* src = ymat + co * (B * Lsp);
    for (long b = 0; b < B; ++b) {
      S* dst = out + (b * Cout + co) * Lsp;
      for (long l = 0; l < Lsp; ++l) dst[l] = src[b * Lsp + l] + bb;
    }
  }
}

template <class S>
void gather_bc(const S* dy, long B, long Cout, long Lsp, S* dymat) {
  for (long co = 0; co < Cout; ++co) {
    S* dst = dymat + co * (B * Lsp);
    for (long b = 0; b < B; ++b) {
      const S* src = dy + (b * Cout + co) * Lsp;
      for (long l = 0; l < Lsp; ++l) dst[b * Lsp + l] = src[l];
    }
  }
}

}  // namespace detail

// x: (B, Cin, L), w: (Cout, Cin, k), bias: (Cout) or -1.
template <class S>
NodeRef conv1d(Graph<S>& g, NodeRef x, NodeRef w, NodeRef bias, long stride = 1,
               long pad = 0, long dil = 1) {
  const Shape &xs = g.shape(x), &ws = g.shape(w);
  if (xs.size() != 3 || ws.size() != 3 || xs[1] != ws[1])
    throw config_error("conv1d: expects x (B,Cin,L), w (Cout,Cin,k)");
  long B = xs[0], Cin = xs[1], L = xs[2], Cout = ws[0], k = ws[2];
  long Lout = (L + 2 * pad - dil * (k - 1) - 1) / stride + 1;
  if (Lout < 1) throw config_error("conv1d: output length would be empty");
  bool ng = g.needs_grad(x) || g.needs_grad(w) || (bias >= 0 && g.needs_grad(bias));
  NodeRef r = g.new_node({B, Cout, Lout}, ng);
  auto col = std::make_shared<std::vector<S>>(Cin * k * B * Lout);
  detail::im2col_1d(g.val(x), B, Cin, L, k, stride, pad, dil, Lout, col->data());
  {
    std::vector<S> ymat(Cout * B * Lout);
    CMapM<S> W(g.val(w), Cout, Cin * k), C(col->data(), Cin * k, B * Lout);
    MapM<S> Y(ymat.data(), Cout, B * Lout);
    Y.noalias() = W * C;
    detail::scatter_bc(ymat.data(), B, Cout, Lout, bias >= 0 ? g.val(bias) : nullptr,
                       g.val(r));
  }
  if (ng)
    g.node(r).back = [&g, x, w, bias, r, col, B, Cin, L, Cout, k, stride, pad, dil,
                      Lout] {
      std::vector<S> dymat(Cout * B * Lout);
      detail::gather_bc(g.grad(r), B, Cout, Lout, dymat.data());
      CMapM<S> dY(dymat.data(), Cout, B * Lout);
      if (g.needs_grad(w)) {
        CMapM<S> C(col->data(), Cin * k, B * Lout);
        MapM<S> dW(g.grad(w), Cout, Cin * k);
        dW.noalias() += dY * C.transpose();
      }
      if (bias >= 0 && g.needs_grad(bias)) {
        S* db = g.grad(bias);  // serial sum: bit-stable across allocations
        for (long co = 0; co < Cout; ++co) {
          const S* row = dymat.data() + co * (B * Lout);
          S s = 0;
          for (long i = 0; i < B * Lout; ++i) s += row[i];
          db[co] += s;
        }
      }
      if (g.needs_grad(x)) {
        std::vector<S> dcol(Cin * k * B * Lout);
        CMapM<S> W(g.val(w), Cout, Cin * k);
        MapM<S> dC(dcol.data(), Cin * k, B * Lout);
        dC.noalias() = W.transpose() * dY;
        detail::col2im_1d(dcol.data(), B, Cin, L, k, stride, pad, dil, Lout,
                          g.grad(x));
      }
    };
  return r;
}

// x: (B, Cin, H, W), w: (Cout, Cin, k, k), bias: (Cout) or -1.
template <class S>
NodeRef conv2d(Graph<S>& g, NodeRef x, NodeRef w, NodeRef bias, long stride = 1,
               long pad = 0) {
  const Shape &xs = g.shape(x), &ws = g.shape(w);
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1] || ws[2] != ws[3])
    throw config_error("conv2d: expects x (B,Cin,H,W), w (Cout,Cin,k,k)");
  long B = xs[0], Cin = xs[1], H = xs[2], W = xs[3], Cout = ws[0], k = ws[2];
  long Hout = (H + 2 * pad - k) / stride + 1, Wout = (W + 2 * pad - k) / stride + 1;
  if (Hout < 1 || Wout < 1) throw config_error("conv2d: output would be empty");
  long HW = Hout * Wout;
  bool ng = g.needs_grad(x) || g.needs_grad(w) || (bias >= 0 && g.needs_grad(bias));
  NodeRef r = g.new_node({B, Cout, Hout, Wout}, ng);
  auto col = std::make_shared<std::vector<S>>(Cin * k * k * B * HW);
  detail::im2col_2d(g.val(x), B, Cin, H, W, k, stride, pad, Hout, Wout, col->data());
  {
    std::vector<S> ymat(Cout * B * HW);
    CMapM<S> Wm(g.val(w), Cout, Cin * k * k), C(col->data(), Cin * k * k, B * HW);
    MapM<S> Y(ymat.data(), Cout, B * HW);
    Y.noalias() = Wm * C;
    detail::scatter_bc(ymat.data(), B, Cout, HW, bias >= 0 ? g.val(bias) : nullptr,
                       g.val(r));
  }
  if (ng)
    g.node(r).back = [&g, x, w, bias, r, col, B, Cin, H, W, Cout, k, stride, pad,
                      Hout, Wout, HW] {
      std::vector<S> dymat(Cout * B * HW);
      detail::gather_bc(g.grad(r), B, Cout, HW, dymat.data());
      CMapM<S> dY(dymat.data(), Cout, B * HW);
      if (g.needs_grad(w)) {
        CMapM<S> C(col->data(), Cin * k * k, B * HW);
        MapM<S> dW(g.grad(w), Cout, Cin * k * k);
        dW.noalias() += dY * C.transpose();
      }
      if (bias >= 0 && g.needs_grad(bias)) {
        S* db = g.grad(bias);  // serial sum: bit-stable across allocations
        for (long co = 0; co < Cout; ++co) {
          const S* row = dymat.data() + co * (B * HW);
          S s = 0;
          for (long i = 0; i < B * HW; ++i) s += row[i];
          db[co] += s;
        }
      }
      if (g.needs_grad(x)) {
        std::vector<S> dcol(Cin * k * k * B * HW);
        CMapM<S> Wm(g.val(w), Cout, Cin * k * k);
        MapM<S> dC(dcol.data(), Cin * k * k, B * HW);
        dC.noalias() = Wm.transpose() * dY;
        detail::col2im_2d(dcol.data(), B, Cin, H, W, k, stride, pad, Hout, Wout,
                          g.grad(x));
      }
    };
  return r;
}

// (B, C, L) -> (B, C, L*factor), each sample repeated factor times.
template <class S>
NodeRef upsample_nearest_1d(Graph<S>& g, NodeRef x, long factor) {
  const Shape& xs = g.shape(x);
  if (xs.size() != 3) throw config_error("upsample_nearest_1d: expects (B,C,L)");
  long BC = xs[0] * xs[1], L = xs[2];
  NodeRef r = g.new_node({xs[0], xs[1], L * factor}, g.needs_grad(x));
  const S* px = g.val(x);
  S* pr = g.val(r);
  for (long bc = 0; bc < BC; ++bc)
    for (long l = 0; l < L; ++l) {
      S v = px[bc * L + l];
      S* dst = pr + bc * L * factor + l * factor;
      for (long f = 0; f < factor; ++f) dst[f] = v;
    }
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, BC, L, factor] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long bc = 0; bc < BC; ++bc)
        for (long l = 0; l < L; ++l) {
          const S* src = gr + bc * L * factor + l * factor;
          S acc = S(0);
          for (long f = 0; f < factor; ++f) acc += src[f];
          gx[bc * L + l] += acc;
        }
    };
  return r;
}

// (B, C, H, W) -> (B, C, H*factor, W*factor).
template <class S>
NodeRef upsample_nearest_2d(Graph<S>& g, NodeRef x, long factor) {
  const Shape& xs = g.shape(x);
  if (xs.size() != 4) throw config_error("upsample_nearest_2d: expects (B,C,H,W)");
  long BC = xs[0] * xs[1], H = xs[2], W = xs[3];
  long Ho = H * factor, Wo = W * factor;
  NodeRef r = g.new_node({xs[0], xs[1], Ho, Wo}, g.needs_grad(x));
  const S* px = g.val(x);
  S* pr = g.val(r);
  for (long bc = 0; bc < BC; ++bc)
    for (long i = 0; i < Ho; ++i) {
      const S* src = px + bc * H * W + (i / factor) * W;
      S* dst = pr + bc * Ho * Wo + i * Wo;
      for (long j = 0; j < Wo; ++j) dst[j] = src[j / factor];
    }
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, BC, H, W, Ho, Wo, factor] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long bc = 0; bc < BC; ++bc)
        for (long i = 0; i < Ho; ++i) {
          const S* src = gr + bc * Ho * Wo + i * Wo;
          S* dst = gx + bc * H * W + (i / factor) * W;
          for (long j = 0; j < Wo; ++j) dst[j / factor] += src[j];
        }
    };
  return r;
}

}  // namespace mmdiff
