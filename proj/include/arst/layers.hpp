#pragma once

// Layer primitives with hand-written backward passes. Every layer exposes a
// batched forward over a T-row matrix and a single-row forward used by the
// streaming decoder; both accumulate in the same order so their outputs agree
// bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "arst/numerics.hpp"

namespace arst {

template <typename Scalar>
class Linear {
 public:
  Parameter<Scalar> weight;  // in x out
  Parameter<Scalar> bias;    // 1 x out

  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out)
      : weight(name + ".weight", in, out), bias(name + ".bias", 1, out) {}

  std::size_t in_dim() const { return weight.value.rows(); }
  std::size_t out_dim() const { return weight.value.cols(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& x) const {
    Matrix<Scalar> y = matmul(x, weight.value);
    const auto b = bias.value.row(0);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      auto r = y.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += b[j];
    }
    return y;
  }

  void forward_row(std::span<const Scalar> x, std::span<Scalar> y) const {
    const std::size_t n = out_dim();
    if (x.size() != in_dim() || y.size() != n) {
      throw DimensionError("Linear::forward_row: expected " + std::to_string(in_dim()) + "->" +
                           std::to_string(n) + ", got " + std::to_string(x.size()) + "->" +
                           std::to_string(y.size()));
    }
    std::fill(y.begin(), y.end(), Scalar(0));
    for (std::size_t k = 0; k < x.size(); ++k) {
      const Scalar xk = x[k];
      const Scalar* wrow = weight.value.row(k).data();
      for (std::size_t j = 0; j < n; ++j) y[j] += xk * wrow[j];
    }
    const auto b = bias.value.row(0);
    for (std::size_t j = 0; j < n; ++j) y[j] += b[j];
  }

  std::vector<Scalar> forward_row(std::span<const Scalar> x) const {
    std::vector<Scalar> y(out_dim());
    forward_row(x, y);
    return y;
  }

  // Accumulates weight/bias grads; returns dL/dx.
  Matrix<Scalar> backward(const Matrix<Scalar>& x, const Matrix<Scalar>& dy) {
    add_inplace(weight.grad, matmul_tn(x, dy));
    auto gb = bias.grad.row(0);
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      const auto r = dy.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) gb[j] += r[j];
    }
    return matmul_nt(dy, weight.value);
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }
};

template <typename Scalar>
class LayerNorm {
 public:
  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Scalar eps = Scalar(1e-5);

  struct Cache {
    Matrix<Scalar> xhat;
    std::vector<Scalar> inv_std;
  };

  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t dim, Scalar epsilon)
      : gamma(name + ".gamma", 1, dim), beta(name + ".beta", 1, dim), eps(epsilon) {
    gamma.value.fill(Scalar(1));
  }

  void forward_row(std::span<const Scalar> x, std::span<Scalar> y, Scalar* xhat = nullptr,
                   Scalar* inv_std = nullptr) const {
    const std::size_t d = x.size();
    const auto g = gamma.value.row(0);
    const auto b = beta.value.row(0);
    Scalar mean = 0;
    for (Scalar v : x) mean += v;
    mean /= static_cast<Scalar>(d);
    Scalar var = 0;
    for (Scalar v : x) var += (v - mean) * (v - mean);
    var /= static_cast<Scalar>(d);
    const Scalar inv = Scalar(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      const Scalar h = (x[i] - mean) * inv;
      if (xhat) xhat[i] = h;
      y[i] = g[i] * h + b[i];
    }
    if (inv_std) *inv_std = inv;
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache) const {
    Matrix<Scalar> y(x.rows(), x.cols());
    if (cache) {
      cache->xhat = Matrix<Scalar>(x.rows(), x.cols());
      cache->inv_std.assign(x.rows(), Scalar(0));
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      forward_row(x.row(i), y.row(i), cache ? cache->xhat.row(i).data() : nullptr,
                  cache ? &cache->inv_std[i] : nullptr);
    }
    return y;
  }

  Matrix<Scalar> backward(const Cache& cache, const Matrix<Scalar>& dy) {
    const std::size_t d = dy.cols();
    Matrix<Scalar> dx(dy.rows(), d);
    const auto g = gamma.value.row(0);
    auto gg = gamma.grad.row(0);
    auto gb = beta.grad.row(0);
    std::vector<Scalar> dxhat(d);
    for (std::size_t i = 0; i < dy.rows(); ++i) {
      const auto dyr = dy.row(i);
      const auto xh = cache.xhat.row(i);
      Scalar sum_dxhat = 0;
      Scalar sum_dxhat_xhat = 0;
      for (std::size_t j = 0; j < d; ++j) {
        gg[j] += dyr[j] * xh[j];
        gb[j] += dyr[j];
        dxhat[j] = dyr[j] * g[j];
        sum_dxhat += dxhat[j];
        sum_dxhat_xhat += dxhat[j] * xh[j];
      }
      const Scalar scale = cache.inv_std[i] / static_cast<Scalar>(d);
      auto dxr = dx.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        dxr[j] = scale * (static_cast<Scalar>(d) * dxhat[j] - sum_dxhat - xh[j] * sum_dxhat_xhat);
      }
    }
    return dx;
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
  }
};

// Scaled dot-product attention of one query row against the key/value rows
// [first, last] (inclusive). key_row/value_row map a position to a row
// pointer. Writes the concatenated head outputs into `out` and, if given, the
// attention weights into probs[h * (last - first + 1) + (j - first)].
template <typename Scalar, typename KeyFn, typename ValueFn>
void attend_row(const Scalar* q, std::size_t first, std::size_t last, KeyFn key_row,
                ValueFn value_row, std::size_t n_heads, std::size_t d_model, Scalar* out,
                Scalar* probs) {
  const std::size_t d_head = d_model / n_heads;
  const std::size_t span = last - first + 1;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d_head));
  std::vector<Scalar> p(span);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::size_t off = h * d_head;
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t j = first; j <= last; ++j) {
      const Scalar* k = key_row(j) + off;
      Scalar s = 0;
      for (std::size_t e = 0; e < d_head; ++e) s += q[off + e] * k[e];
      s *= scale;
      p[j - first] = s;
      mx = std::max(mx, s);
    }
    Scalar sum = 0;
    for (auto& v : p) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : p) v /= sum;
    Scalar* o = out + off;
    std::fill(o, o + d_head, Scalar(0));
    for (std::size_t j = first; j <= last; ++j) {
      const Scalar* v = value_row(j) + off;
      const Scalar w = p[j - first];
      for (std::size_t e = 0; e < d_head; ++e) o[e] += w * v[e];
    }
    if (probs) std::copy(p.begin(), p.end(), probs + h * span);
  }
}

// Multi-head attention restricted to a banded causal mask. Queries come from
// one stream and keys/values from another (the same matrix for
// self-attention); both streams have the same length.
template <typename Scalar>
class BandedAttention {
 public:
  Linear<Scalar> q, k, v, o;
  std::size_t n_heads = 1;

  struct Cache {
    Matrix<Scalar> xq, xkv, Q, K, V, heads;
    // probs[i] holds n_heads * span(i) weights for query row i.
    std::vector<std::vector<Scalar>> probs;
    std::size_t width = 0;
  };

  BandedAttention() = default;
  BandedAttention(const std::string& name, std::size_t d_model, std::size_t heads)
      : q(name + ".q", d_model, d_model),
        k(name + ".k", d_model, d_model),
        v(name + ".v", d_model, d_model),
        o(name + ".o", d_model, d_model),
        n_heads(heads) {}

  std::size_t d_model() const { return q.in_dim(); }

  Matrix<Scalar> forward(const Matrix<Scalar>& xq, const Matrix<Scalar>& xkv, std::size_t width,
                         Cache* cache) const {
    if (xq.rows() != xkv.rows()) {
      throw DimensionError("BandedAttention: query/key length mismatch " + xq.shape_string() +
                           " vs " + xkv.shape_string());
    }
    const std::size_t T = xq.rows();
    const std::size_t d = d_model();
    const BandedCausalMask mask(T, width);
    Matrix<Scalar> Q = q.forward(xq);
    Matrix<Scalar> K = k.forward(xkv);
    Matrix<Scalar> V = v.forward(xkv);
    Matrix<Scalar> heads(T, d);
    std::vector<std::vector<Scalar>> probs(T);
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t first = mask.first_key(i);
      probs[i].resize(n_heads * (i - first + 1));
      attend_row<Scalar>(
          Q.row(i).data(), first, i, [&](std::size_t j) { return K.row(j).data(); },
          [&](std::size_t j) { return V.row(j).data(); }, n_heads, d, heads.row(i).data(),
          probs[i].data());
    }
    Matrix<Scalar> y = o.forward(heads);
    if (cache) {
      cache->xq = xq;
      cache->xkv = xkv;
      cache->Q = std::move(Q);
      cache->K = std::move(K);
      cache->V = std::move(V);
      cache->heads = std::move(heads);
      cache->probs = std::move(probs);
      cache->width = width;
    }
    return y;
  }

  // Returns {dL/dxq, dL/dxkv}.
  std::pair<Matrix<Scalar>, Matrix<Scalar>> backward(const Cache& c, const Matrix<Scalar>& dy) {
    const std::size_t T = dy.rows();
    const std::size_t d = d_model();
    const std::size_t d_head = d / n_heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d_head));
    const BandedCausalMask mask(T, c.width);

    Matrix<Scalar> dheads = o.backward(c.heads, dy);
    Matrix<Scalar> dQ(T, d), dK(T, d), dV(T, d);
    std::vector<Scalar> dp;
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t first = mask.first_key(i);
      const std::size_t span = i - first + 1;
      dp.assign(span, Scalar(0));
      for (std::size_t h = 0; h < n_heads; ++h) {
        const std::size_t off = h * d_head;
        const Scalar* p = c.probs[i].data() + h * span;
        const Scalar* dout = dheads.row(i).data() + off;
        Scalar dot = 0;
        for (std::size_t j = first; j <= i; ++j) {
          const Scalar* vr = c.V.row(j).data() + off;
          Scalar* dvr = dV.row(j).data() + off;
          Scalar s = 0;
          for (std::size_t e = 0; e < d_head; ++e) {
            s += dout[e] * vr[e];
            dvr[e] += p[j - first] * dout[e];
          }
          dp[j - first] = s;
          dot += p[j - first] * s;
        }
        const Scalar* qr = c.Q.row(i).data() + off;
        Scalar* dqr = dQ.row(i).data() + off;
        for (std::size_t j = first; j <= i; ++j) {
          const Scalar ds = p[j - first] * (dp[j - first] - dot) * scale;
          const Scalar* kr = c.K.row(j).data() + off;
          Scalar* dkr = dK.row(j).data() + off;
          for (std::size_t e = 0; e < d_head; ++e) {
            dqr[e] += ds * kr[e];
            dkr[e] += ds * qr[e];
          }
        }
      }
    }
    Matrix<Scalar> dxq = q.backward(c.xq, dQ);
    Matrix<Scalar> dxkv = k.backward(c.xkv, dK);
    add_inplace(dxkv, v.backward(c.xkv, dV));
    return {std::move(dxq), std::move(dxkv)};
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    q.collect(out);
    k.collect(out);
    v.collect(out);
    o.collect(out);
  }
};

// Two-layer ReLU feed-forward block.
template <typename Scalar>
class FeedForward {
 public:
  Linear<Scalar> fc1, fc2;

  struct Cache {
    Matrix<Scalar> x, pre, act;
  };

  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t d_model, std::size_t d_ffn)
      : fc1(name + ".fc1", d_model, d_ffn), fc2(name + ".fc2", d_ffn, d_model) {}

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Cache* cache) const {
    Matrix<Scalar> pre = fc1.forward(x);
    Matrix<Scalar> act = pre;
    for (auto& v : act.data()) v = std::max(v, Scalar(0));
    Matrix<Scalar> y = fc2.forward(act);
    if (cache) {
      cache->x = x;
      cache->pre = std::move(pre);
      cache->act = std::move(act);
    }
    return y;
  }

  void forward_row(std::span<const Scalar> x, std::span<Scalar> y) const {
    std::vector<Scalar> h = fc1.forward_row(x);
    for (auto& v : h) v = std::max(v, Scalar(0));
    fc2.forward_row(h, y);
  }

  Matrix<Scalar> backward(const Cache& c, const Matrix<Scalar>& dy) {
    Matrix<Scalar> dact = fc2.backward(c.act, dy);
    auto& dd = dact.data();
    const auto& pre = c.pre.data();
    for (std::size_t i = 0; i < dd.size(); ++i) {
      if (!(pre[i] > Scalar(0))) dd[i] = Scalar(0);
    }
    return fc1.backward(c.x, dact);
  }

  void collect(std::vector<Parameter<Scalar>*>& out) {
    fc1.collect(out);
    fc2.collect(out);
  }
};

}  // namespace arst
