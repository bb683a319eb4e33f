#pragma once

// Shared network building blocks on top of the tensor engine: multi-head
// attention in the two flavors the model needs (plain with optional key
// masking, causal with a learnable relative-distance bias shared across
// heads). Attention includes the residual connection; no output projection
// is applied after head concatenation.

#include <vector>

#include "atgmoe/tensor.hpp"

namespace atgmoe::nn {

using nc::Tensor;

inline constexpr double kMaskValue = -1e9;

// Attention output without the residual. Queries from x_q, keys/values
// from x_kv. key_mask[i] true means key i is masked out of every row.
template <class S>
Tensor<S> mha_out(const Tensor<S>& x_q, const Tensor<S>& x_kv, const Tensor<S>& wq,
                  const Tensor<S>& wk, const Tensor<S>& wv, int64_t heads,
                  const std::vector<bool>& key_mask = {}) {
  int64_t d = wq.size(1);
  int64_t dk = d / heads;
  int64_t tk = x_kv.size(0);
  auto q = nc::matmul(x_q, wq);
  auto k = nc::matmul(x_kv, wk);
  auto v = nc::matmul(x_kv, wv);
  Tensor<S> mask_row;
  if (!key_mask.empty()) {
    std::vector<S> m(static_cast<size_t>(tk), S(0));
    for (int64_t j = 0; j < tk; ++j)
      if (key_mask[static_cast<size_t>(j)]) m[static_cast<size_t>(j)] = static_cast<S>(kMaskValue);
    mask_row = Tensor<S>::from_data({1, tk}, std::move(m));
  }
  std::vector<Tensor<S>> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int64_t h = 0; h < heads; ++h) {
    auto qh = nc::slice(q, 1, h * dk, dk);
    auto kh = nc::slice(k, 1, h * dk, dk);
    auto vh = nc::slice(v, 1, h * dk, dk);
    auto scores = nc::scale(nc::matmul(qh, nc::transpose(kh)), 1.0 / std::sqrt(double(dk)));
    if (mask_row.defined()) scores = nc::add(scores, mask_row);
    outs.push_back(nc::matmul(nc::softmax(scores, 1), vh));
  }
  return nc::concat(outs, 1);
}

// Residual form, matching the fusion equations (residual onto x_q).
template <class S>
Tensor<S> mha(const Tensor<S>& x_q, const Tensor<S>& x_kv, const Tensor<S>& wq,
              const Tensor<S>& wk, const Tensor<S>& wv, int64_t heads,
              const std::vector<bool>& key_mask = {}) {
  return nc::add(x_q, mha_out(x_q, x_kv, wq, wk, wv, heads, key_mask));
}

// Causal self-attention output (no residual) with a learnable relative
// position bias b[i - j] added to every in-mask score; `brel` is a
// [max_len, 1] table indexed by the distance i - j.
template <class S>
Tensor<S> causal_mha_out(const Tensor<S>& x, const Tensor<S>& wq, const Tensor<S>& wk,
                         const Tensor<S>& wv, const Tensor<S>& brel, int64_t heads) {
  int64_t d = wq.size(1);
  int64_t dk = d / heads;
  int64_t t = x.size(0);
  auto q = nc::matmul(x, wq);
  auto k = nc::matmul(x, wk);
  auto v = nc::matmul(x, wv);

  // bias matrix B[i,j] = brel[i-j] for i >= j; -inf above the diagonal
  std::vector<int64_t> idx(static_cast<size_t>(t * t), 0);
  std::vector<S> causal(static_cast<size_t>(t * t), S(0));
  for (int64_t i = 0; i < t; ++i)
    for (int64_t j = 0; j < t; ++j) {
      if (i >= j)
        idx[static_cast<size_t>(i * t + j)] = i - j;
      else
        causal[static_cast<size_t>(i * t + j)] = static_cast<S>(kMaskValue);
    }
  auto bias = nc::reshape(nc::embedding(brel, idx), {t, t});
  auto causal_mask = Tensor<S>::from_data({t, t}, std::move(causal));

  std::vector<Tensor<S>> outs;
  outs.reserve(static_cast<size_t>(heads));
  for (int64_t h = 0; h < heads; ++h) {
    auto qh = nc::slice(q, 1, h * dk, dk);
    auto kh = nc::slice(k, 1, h * dk, dk);
    auto vh = nc::slice(v, 1, h * dk, dk);
    auto scores = nc::scale(nc::matmul(qh, nc::transpose(kh)), 1.0 / std::sqrt(double(dk)));
    scores = nc::add(nc::add(scores, bias), causal_mask);
    outs.push_back(nc::matmul(nc::softmax(scores, 1), vh));
  }
  return nc::concat(outs, 1);
}

// Residual form of the causal block.
template <class S>
Tensor<S> causal_mha(const Tensor<S>& x, const Tensor<S>& wq, const Tensor<S>& wk,
                     const Tensor<S>& wv, const Tensor<S>& brel, int64_t heads) {
  return nc::add(x, causal_mha_out(x, wq, wk, wv, brel, heads));
}

// Two-layer GELU MLP.
template <class S>
Tensor<S> mlp2(const Tensor<S>& x, const Tensor<S>& w1, const Tensor<S>& b1, const Tensor<S>& w2,
               const Tensor<S>& b2) {
  return nc::linear(nc::gelu(nc::linear(x, w1, b1)), w2, b2);
}

}  // namespace atgmoe::nn
