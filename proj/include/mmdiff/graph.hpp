// Reverse-mode autodiff tape. Each forward pass builds a fresh graph of
// eagerly evaluated nodes; backward() replays registered closures in
// reverse creation order. Templated on the scalar type so the same model
// code runs in float for speed and double for gradient verification.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmdiff/core.hpp"
#include "mmdiff/rng.hpp"
#include "mmdiff/tensor.hpp"

namespace mmdiff {

using NodeRef = int;

// Ordered, named parameter arrays with gradient accumulators.
template <class S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad;
  };

  int add(const std::string& name, Shape shape) {
    if (by_name_.count(name)) throw config_error("duplicate parameter: " + name);
    long n = shape_numel(shape);
    by_name_[name] = static_cast<int>(entries_.size());
    entries_.push_back({name, std::move(shape), std::vector<S>(n, S(0)),
                        std::vector<S>(n, S(0))});
    return static_cast<int>(entries_.size()) - 1;
  }

  int index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw config_error("unknown parameter: " + name);
    return it->second;
  }

  Entry& operator[](int i) { return entries_[i]; }
  const Entry& operator[](int i) const { return entries_[i]; }
  int size() const { return static_cast<int>(entries_.size()); }

  long total_params() const {
    long n = 0;
    for (const auto& e : entries_) n += static_cast<long>(e.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), S(0));
  }

  double grad_sq_norm() const {
    double s = 0;
    for (const auto& e : entries_)
      for (S g : e.grad) s += static_cast<double>(g) * static_cast<double>(g);
    return s;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> by_name_;
};

template <class S>
class Graph {
 public:
  struct Node {
    Shape shape;
    std::vector<S> val;
    std::vector<S> grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  NodeRef new_node(Shape shape, bool needs_grad) {
    Node n;
    n.shape = std::move(shape);
    n.val.assign(shape_numel(n.shape), S(0));
    n.needs_grad = needs_grad;
    if (needs_grad) n.grad.assign(n.val.size(), S(0));
    nodes_.push_back(std::move(n));
    return static_cast<NodeRef>(nodes_.size()) - 1;
  }

  Node& node(NodeRef r) { return nodes_[r]; }
  const Shape& shape(NodeRef r) const { return nodes_[r].shape; }
  long numel(NodeRef r) const { return static_cast<long>(nodes_[r].val.size()); }
  S* val(NodeRef r) { return nodes_[r].val.data(); }
  const S* val(NodeRef r) const { return nodes_[r].val.data(); }
  S* grad(NodeRef r) { return nodes_[r].grad.data(); }
  bool needs_grad(NodeRef r) const { return nodes_[r].needs_grad; }

  // Seeds d(loss)/d(loss) = 1 and runs all backward closures in reverse.
  void backward(NodeRef loss) {
    if (numel(loss) != 1) throw config_error("backward target must be scalar");
    if (!nodes_[loss].needs_grad)
      throw config_error("backward target does not require gradients");
    nodes_[loss].grad[0] = S(1);
    for (long i = loss; i >= 0; --i) {
      if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back();
    }
  }

 private:
  std::vector<Node> nodes_;
};

// ---- Leaves ----

template <class S>
NodeRef constant(Graph<S>& g, const Tensor<S>& t) {
  NodeRef r = g.new_node(t.shape, false);
  std::copy(t.v.begin(), t.v.end(), g.val(r));
  return r;
}

template <class S>
NodeRef input(Graph<S>& g, const Tensor<S>& t, bool needs_grad = false) {
  NodeRef r = g.new_node(t.shape, needs_grad);
  std::copy(t.v.begin(), t.v.end(), g.val(r));
  return r;
}

template <class S>
NodeRef param(Graph<S>& g, ParamStore<S>& store, int idx) {
  auto& e = store[idx];
  NodeRef r = g.new_node(e.shape, true);
  std::copy(e.value.begin(), e.value.end(), g.val(r));
  g.node(r).back = [&g, &store, idx, r] {
    auto& entry = store[idx];
    const S* gr = g.grad(r);
    for (size_t i = 0; i < entry.grad.size(); ++i) entry.grad[i] += gr[i];
  };
  return r;
}

// ---- Elementwise / structural ops ----

template <class S>
NodeRef add(Graph<S>& g, NodeRef a, NodeRef b) {
  if (g.shape(a) != g.shape(b)) throw config_error("add: shape mismatch");
  bool ng = g.needs_grad(a) || g.needs_grad(b);
  NodeRef r = g.new_node(g.shape(a), ng);
  long n = g.numel(r);
  const S *pa = g.val(a), *pb = g.val(b);
  S* pr = g.val(r);
  for (long i = 0; i < n; ++i) pr[i] = pa[i] + pb[i];
  if (ng)
    g.node(r).back = [&g, a, b, r, n] {
      const S* gr = g.grad(r);
      if (g.needs_grad(a)) {
        S* ga = g.grad(a);
        for (long i = 0; i < n; ++i) ga[i] += gr[i];
      }
      if (g.needs_grad(b)) {
        S* gb = g.grad(b);
        for (long i = 0; i < n; ++i) gb[i] += gr[i];
      }
    };
  return r;
}

template <class S>
NodeRef sub(Graph<S>& g, NodeRef a, NodeRef b) {
  if (g.shape(a) != g.shape(b)) throw config_error("sub: shape mismatch");
  bool ng = g.needs_grad(a) || g.needs_grad(b);
  NodeRef r = g.new_node(g.shape(a), ng);
  long n = g.numel(r);
  const S *pa = g.val(a), *pb = g.val(b);
  S* pr = g.val(r);
  for (long i = 0; i < n; ++i) pr[i] = pa[i] - pb[i];
  if (ng)
    g.node(r).back = [&g, a, b, r, n] {
      const S* gr = g.grad(r);
      if (g.needs_grad(a)) {
        S* ga = g.grad(a);
        for (long i = 0; i < n; ++i) ga[i] += gr[i];
      }
      if (g.needs_grad(b)) {
        S* gb = g.grad(b);
        for (long i = 0; i < n; ++i) gb[i] -= gr[i];
      }
    };
  return r;
}

template <class S>
NodeRef scale(Graph<S>& g, NodeRef x, double c) {
  NodeRef r = g.new_node(g.shape(x), g.needs_grad(x));
  long n = g.numel(r);
  const S* px = g.val(x);
  S* pr = g.val(r);
  S cs = static_cast<S>(c);
  for (long i = 0; i < n; ++i) pr[i] = px[i] * cs;
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, n, cs] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long i = 0; i < n; ++i) gx[i] += gr[i] * cs;
    };
  return r;
}

template <class S>
NodeRef silu(Graph<S>& g, NodeRef x) {
  NodeRef r = g.new_node(g.shape(x), g.needs_grad(x));
  long n = g.numel(r);
  const S* px = g.val(x);
  S* pr = g.val(r);
  for (long i = 0; i < n; ++i) {
    S s = S(1) / (S(1) + std::exp(-px[i]));
    pr[i] = px[i] * s;
  }
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, n] {
      const S* gr = g.grad(r);
      const S* px = g.val(x);
      S* gx = g.grad(x);
      for (long i = 0; i < n; ++i) {
        S s = S(1) / (S(1) + std::exp(-px[i]));
        gx[i] += gr[i] * s * (S(1) + px[i] * (S(1) - s));
      }
    };
  return r;
}

// x: (B, C, rest...), bias: (C) broadcast over batch and trailing dims.
template <class S>
NodeRef add_channel_bias(Graph<S>& g, NodeRef x, NodeRef bias) {
  const Shape& xs = g.shape(x);
  if (xs.size() < 2 || g.shape(bias) != Shape{xs[1]})
    throw config_error("add_channel_bias: incompatible shapes");
  long B = xs[0], C = xs[1], R = g.numel(x) / (B * C);
  bool ng = g.needs_grad(x) || g.needs_grad(bias);
  NodeRef r = g.new_node(xs, ng);
  const S *px = g.val(x), *pb = g.val(bias);
  S* pr = g.val(r);
  for (long b = 0; b < B; ++b)
    for (long c = 0; c < C; ++c) {
      S bb = pb[c];
      const S* xi = px + (b * C + c) * R;
      S* ri = pr + (b * C + c) * R;
      for (long i = 0; i < R; ++i) ri[i] = xi[i] + bb;
    }
  if (ng)
    g.node(r).back = [&g, x, bias, r, B, C, R] {
      const S* gr = g.grad(r);
      if (g.needs_grad(x)) {
        S* gx = g.grad(x);
        long n = B * C * R;
        for (long i = 0; i < n; ++i) gx[i] += gr[i];
      }
      if (g.needs_grad(bias)) {
        S* gb = g.grad(bias);
        for (long b = 0; b < B; ++b)
          for (long c = 0; c < C; ++c) {
            const S* gi = gr + (b * C + c) * R;
            S acc = S(0);
            for (long i = 0; i < R; ++i) acc += gi[i];
            gb[c] += acc;
          }
      }
    };
  return r;
}

// Scale-shift conditioning: x (B,C,rest), scale_shift (2C) -> x*(1+s) + t.
template <class S>
NodeRef channel_scale_shift(Graph<S>& g, NodeRef x, NodeRef ss) {
  const Shape& xs = g.shape(x);
  long B = xs[0], C = xs[1], R = g.numel(x) / (B * C);
  if (g.shape(ss) != Shape{2 * C})
    throw config_error("channel_scale_shift: conditioning must have 2C entries");
  bool ng = g.needs_grad(x) || g.needs_grad(ss);
  NodeRef r = g.new_node(xs, ng);
  const S *px = g.val(x), *ps = g.val(ss);
  S* pr = g.val(r);
  for (long b = 0; b < B; ++b)
    for (long c = 0; c < C; ++c) {
      S sc = S(1) + ps[c], sh = ps[C + c];
      const S* xi = px + (b * C + c) * R;
      S* ri = pr + (b * C + c) * R;
      for (long i = 0; i < R; ++i) ri[i] = xi[i] * sc + sh;
    }
  if (ng)
    g.node(r).back = [&g, x, ss, r, B, C, R] {
      const S* gr = g.grad(r);
      const S* px = g.val(x);
      const S* ps = g.val(ss);
      if (g.needs_grad(x)) {
        S* gx = g.grad(x);
        for (long b = 0; b < B; ++b)
          for (long c = 0; c < C; ++c) {
            S sc = S(1) + ps[c];
            const S* gi = gr + (b * C + c) * R;
            S* xi = gx + (b * C + c) * R;
            for (long i = 0; i < R; ++i) xi[i] += gi[i] * sc;
          }
      }
      if (g.needs_grad(ss)) {
        S* gs = g.grad(ss);
        for (long b = 0; b < B; ++b)
          for (long c = 0; c < C; ++c) {
            const S* gi = gr + (b * C + c) * R;
            const S* xi = px + (b * C + c) * R;
            S as = S(0), ah = S(0);
            for (long i = 0; i < R; ++i) {
              as += gi[i] * xi[i];
              ah += gi[i];
            }
            gs[c] += as;
            gs[C + c] += ah;
          }
      }
    };
  return r;
}

// x: (n, din) row-major, w: (dout, din), bias: (dout) or -1 for none.
template <class S>
NodeRef linear(Graph<S>& g, NodeRef x, NodeRef w, NodeRef bias = -1);

// Concatenate along axis 1 for (B, C, rest) tensors with equal B and rest.
template <class S>
NodeRef concat_channels(Graph<S>& g, NodeRef a, NodeRef b) {
  const Shape &sa = g.shape(a), &sb = g.shape(b);
  if (sa.size() != sb.size() || sa.size() < 2 || sa[0] != sb[0])
    throw config_error("concat_channels: incompatible ranks");
  for (size_t i = 2; i < sa.size(); ++i)
    if (sa[i] != sb[i]) throw config_error("concat_channels: trailing dims differ");
  long B = sa[0], Ca = sa[1], Cb = sb[1];
  long R = g.numel(a) / (B * Ca);
  Shape out = sa;
  out[1] = Ca + Cb;
  bool ng = g.needs_grad(a) || g.needs_grad(b);
  NodeRef r = g.new_node(out, ng);
  const S *pa = g.val(a), *pb = g.val(b);
  S* pr = g.val(r);
  for (long bb = 0; bb < B; ++bb) {
    std::copy(pa + bb * Ca * R, pa + (bb + 1) * Ca * R, pr + bb * (Ca + Cb) * R);
    std::copy(pb + bb * Cb * R, pb + (bb + 1) * Cb * R,
              pr + bb * (Ca + Cb) * R + Ca * R);
  }
  if (ng)
    g.node(r).back = [&g, a, b, r, B, Ca, Cb, R] {
      const S* gr = g.grad(r);
      if (g.needs_grad(a)) {
        S* ga = g.grad(a);
        for (long bb = 0; bb < B; ++bb) {
          const S* src = gr + bb * (Ca + Cb) * R;
          S* dst = ga + bb * Ca * R;
          for (long i = 0; i < Ca * R; ++i) dst[i] += src[i];
        }
      }
      if (g.needs_grad(b)) {
        S* gb = g.grad(b);
        for (long bb = 0; bb < B; ++bb) {
          const S* src = gr + bb * (Ca + Cb) * R + Ca * R;
          S* dst = gb + bb * Cb * R;
          for (long i = 0; i < Cb * R; ++i) dst[i] += src[i];
        }
      }
    };
  return r;
}

template <class S>
NodeRef reshape(Graph<S>& g, NodeRef x, Shape s) {
  if (shape_numel(s) != g.numel(x)) throw config_error("reshape: element count mismatch");
  NodeRef r = g.new_node(std::move(s), g.needs_grad(x));
  std::copy(g.val(x), g.val(x) + g.numel(x), g.val(r));
  long n = g.numel(x);
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, n] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long i = 0; i < n; ++i) gx[i] += gr[i];
    };
  return r;
}

// Axis permutation: out dims are in[perm[k]].
template <class S>
NodeRef permute(Graph<S>& g, NodeRef x, const std::vector<int>& perm) {
  const Shape& xs = g.shape(x);
  size_t rank = xs.size();
  if (perm.size() != rank) throw config_error("permute: rank mismatch");
  Shape out(rank);
  for (size_t k = 0; k < rank; ++k) out[k] = xs[perm[k]];
  // Row-major strides of the input.
  std::vector<long> xstride(rank, 1);
  for (long k = static_cast<long>(rank) - 2; k >= 0; --k)
    xstride[k] = xstride[k + 1] * xs[k + 1];
  NodeRef r = g.new_node(out, g.needs_grad(x));
  long n = g.numel(x);
  // Map each output flat index to its source flat index once, reused by backward.
  auto map = std::make_shared<std::vector<long>>(n);
  {
    std::vector<long> idx(rank, 0);
    const S* px = g.val(x);
    S* pr = g.val(r);
    for (long o = 0; o < n; ++o) {
      long src = 0;
      for (size_t k = 0; k < rank; ++k) src += idx[k] * xstride[perm[k]];
      (*map)[o] = src;
      pr[o] = px[src];
      for (long k = static_cast<long>(rank) - 1; k >= 0; --k) {
        if (++idx[k] < out[k]) break;
        idx[k] = 0;
      }
    }
  }
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, n, map] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long o = 0; o < n; ++o) gx[(*map)[o]] += gr[o];
    };
  return r;
}

// Row selection from (n, d): out row j = x[rows[j]]. Rows may repeat.
template <class S>
NodeRef rows_gather(Graph<S>& g, NodeRef x, std::shared_ptr<std::vector<long>> rows) {
  const Shape& xs = g.shape(x);
  if (xs.size() != 2) throw config_error("rows_gather: expects a (n, d) matrix");
  long d = xs[1], m = static_cast<long>(rows->size());
  for (long q : *rows)
    if (q < 0 || q >= xs[0]) throw config_error("rows_gather: index out of range");
  NodeRef r = g.new_node({m, d}, g.needs_grad(x));
  const S* px = g.val(x);
  S* pr = g.val(r);
  for (long j = 0; j < m; ++j)
    std::copy(px + (*rows)[j] * d, px + ((*rows)[j] + 1) * d, pr + j * d);
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, rows, m, d] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long j = 0; j < m; ++j) {
        S* dst = gx + (*rows)[j] * d;
        const S* src = gr + j * d;
        for (long i = 0; i < d; ++i) dst[i] += src[i];
      }
    };
  return r;
}

// Inverted dropout; draws one uniform per element in index order.
template <class S>
NodeRef dropout(Graph<S>& g, NodeRef x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw config_error("dropout rate must be < 1");
  long n = g.numel(x);
  double keep = 1.0 - rate;
  auto mask = std::make_shared<std::vector<S>>(n);
  for (long i = 0; i < n; ++i)
    (*mask)[i] = (rng.uniform() < keep) ? static_cast<S>(1.0 / keep) : S(0);
  NodeRef r = g.new_node(g.shape(x), g.needs_grad(x));
  const S* px = g.val(x);
  S* pr = g.val(r);
  for (long i = 0; i < n; ++i) pr[i] = px[i] * (*mask)[i];
  if (g.needs_grad(x))
    g.node(r).back = [&g, x, r, n, mask] {
      const S* gr = g.grad(r);
      S* gx = g.grad(x);
      for (long i = 0; i < n; ++i) gx[i] += gr[i] * (*mask)[i];
    };
  return r;
}

// Mean of squared differences over all elements; target carries no gradient.
template <class S>
NodeRef mse_mean(Graph<S>& g, NodeRef pred, NodeRef target) {
  if (g.shape(pred) != g.shape(target)) throw config_error("mse_mean: shape mismatch");
  long n = g.numel(pred);
  NodeRef r = g.new_node({1}, g.needs_grad(pred));
  const S *pp = g.val(pred), *pt = g.val(target);
  double acc = 0;
  for (long i = 0; i < n; ++i) {
    double d = static_cast<double>(pp[i]) - static_cast<double>(pt[i]);
    acc += d * d;
  }
  g.val(r)[0] = static_cast<S>(acc / n);
  if (g.needs_grad(pred))
    g.node(r).back = [&g, pred, target, r, n] {
      S go = g.grad(r)[0];
      const S *pp = g.val(pred), *pt = g.val(target);
      S* gp = g.grad(pred);
      S c = go * S(2) / static_cast<S>(n);
      for (long i = 0; i < n; ++i) gp[i] += c * (pp[i] - pt[i]);
    };
  return r;
}

}  // namespace mmdiff
