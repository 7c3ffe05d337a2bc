// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <utility>

#include "linear_grad.hpp"
#include "rff/errors.hpp"
#include "rff/kernels.hpp"
#include "rff/layers.hpp"

namespace rff {
namespace {

enum : std::size_t { kQuery = 0, kKey = 2, kValue = 4, kOutput = 6 };

// Cache slots.
enum : std::size_t { kX = 0, kQ, kK, kV, kAttn, kConcat };

}  // namespace

MultiHeadAttentionLayer::MultiHeadAttentionLayer(const LayerParams& params, std::size_t heads)
    : params_(params), heads_(heads) {
  if (params_.size() != 8) throw ParameterError("attention takes 8 tensors (q, k, v, out)");
  if (heads_ == 0) throw ParameterError("attention needs at least one head");
  const Tensor& wq = params_[kQuery]->value;
  if (wq.rank() != 2 || wq.dim(1) % heads_ != 0) {
    throw DimensionError("query kernel must be [d, heads * key_dim]");
  }
  key_dim_ = wq.dim(1) / heads_;
  for (std::size_t slot : {kKey, kValue}) {
    if (params_[slot]->value.shape() != wq.shape()) {
      throw DimensionError("key/value kernels must match the query kernel");
    }
  }
  const Tensor& wo = params_[kOutput]->value;
  if (wo.rank() != 2 || wo.dim(0) != wq.dim(1) || wo.dim(1) != wq.dim(0)) {
    throw DimensionError("output kernel must be [heads * key_dim, d]");
  }
}

Tensor MultiHeadAttentionLayer::forward(const Tensor& x, const ForwardContext& ctx,
                                        Cache* cache) const {
  const std::size_t d = params_[kQuery]->value.dim(0);
  if (x.rank() != 2 || x.dim(1) != d) {
    throw DimensionError("attention expects [T, " + std::to_string(d) + "], got " +
                         shape_string(x.shape()));
  }
  const std::size_t t = x.dim(0);
  const std::size_t hd = heads_ * key_dim_;
  const LinearBackend& lin = ctx.linear();

  Tensor q({t, hd}), k({t, hd}), v({t, hd});
  lin.linear(*params_[kQuery], params_[kQuery + 1], x.data(), t, d, hd, q.data());
  lin.linear(*params_[kKey], params_[kKey + 1], x.data(), t, d, hd, k.data());
  lin.linear(*params_[kValue], params_[kValue + 1], x.data(), t, d, hd, v.data());

  const float scale = 1.0f / std::sqrt(static_cast<float>(key_dim_));
  Tensor attn({heads_, t, t});
  Tensor concat({t, hd});
  std::vector<float> kt(key_dim_ * t);
  for (std::size_t h = 0; h < heads_; ++h) {
    float* scores = attn.data() + h * t * t;
    kernels::transpose(t, key_dim_, k.data() + h * key_dim_, hd, kt.data(), t);
    kernels::gemm(t, t, key_dim_, q.data() + h * key_dim_, hd, kt.data(), t, scores, t, false);
    for (std::size_t i = 0; i < t * t; ++i) scores[i] *= scale;
    softmax_rows({scores, t * t}, t);
    kernels::gemm(t, key_dim_, t, scores, t, v.data() + h * key_dim_, hd,
                  concat.data() + h * key_dim_, hd, false);
  }

  Tensor y({t, d});
  lin.linear(*params_[kOutput], params_[kOutput + 1], concat.data(), t, hd, d, y.data());
  if (cache) {
    cache->tensors.clear();
    cache->tensors.reserve(6);
    cache->tensors.push_back(x);
    cache->tensors.push_back(std::move(q));
    cache->tensors.push_back(std::move(k));
    cache->tensors.push_back(std::move(v));
    cache->tensors.push_back(std::move(attn));
    cache->tensors.push_back(std::move(concat));
  }
  return y;
}

Tensor MultiHeadAttentionLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.size() != 6) throw StateError("attention backward without a recorded forward");
  const Tensor& x = cache.tensors[kX];
  const Tensor& q = cache.tensors[kQ];
  const Tensor& k = cache.tensors[kK];
  const Tensor& v = cache.tensors[kV];
  const Tensor& attn = cache.tensors[kAttn];
  const Tensor& concat = cache.tensors[kConcat];
  const std::size_t t = x.dim(0);
  const std::size_t d = x.dim(1);
  const std::size_t hd = heads_ * key_dim_;
  const float scale = 1.0f / std::sqrt(static_cast<float>(key_dim_));

  // Output projection.
  Param& wo = *params_[kOutput];
  detail::accumulate_kernel_grad(concat.data(), dy.data(), t, hd, d, wo.grad.data());
  detail::accumulate_bias_grad(dy.data(), t, d, params_[kOutput + 1]->grad.data());
  Tensor dconcat({t, hd});
  detail::input_grad(dy.data(), wo.value.data(), t, hd, d, dconcat.data());

  Tensor dq({t, hd}), dk({t, hd}), dv({t, hd});
  std::vector<float> transposed(t * std::max(t, key_dim_));
  std::vector<float> dattn(t * t);
  for (std::size_t h = 0; h < heads_; ++h) {
    const float* a = attn.data() + h * t * t;
    const float* dout = dconcat.data() + h * key_dim_;

    // dA = dO V^T
    kernels::transpose(t, key_dim_, v.data() + h * key_dim_, hd, transposed.data(), t);
    kernels::gemm(t, t, key_dim_, dout, hd, transposed.data(), t, dattn.data(), t, false);

    // dV = A^T dO
    kernels::transpose(t, t, a, t, transposed.data(), t);
    kernels::gemm(t, key_dim_, t, transposed.data(), t, dout, hd, dv.data() + h * key_dim_, hd,
                  false);

    // dS = scale * A * (dA - rowsum(dA * A))
    for (std::size_t i = 0; i < t; ++i) {
      const float* ar = a + i * t;
      float* dr = dattn.data() + i * t;
      float dot = 0.0f;
      for (std::size_t j = 0; j < t; ++j) dot += dr[j] * ar[j];
      for (std::size_t j = 0; j < t; ++j) dr[j] = scale * ar[j] * (dr[j] - dot);
    }

    // dQ = dS K, dK = dS^T Q
    kernels::gemm(t, key_dim_, t, dattn.data(), t, k.data() + h * key_dim_, hd,
                  dq.data() + h * key_dim_, hd, false);
    kernels::transpose(t, t, dattn.data(), t, transposed.data(), t);
    kernels::gemm(t, key_dim_, t, transposed.data(), t, q.data() + h * key_dim_, hd,
                  dk.data() + h * key_dim_, hd, false);
  }

  Tensor dx({t, d});
  bool first = true;
  for (auto [slot, grad] : {std::pair{kQuery, &dq}, std::pair{kKey, &dk}, std::pair{kValue, &dv}}) {
    Param& w = *params_[slot];
    detail::accumulate_kernel_grad(x.data(), grad->data(), t, d, hd, w.grad.data());
    detail::accumulate_bias_grad(grad->data(), t, hd, params_[slot + 1]->grad.data());
    detail::input_grad(grad->data(), w.value.data(), t, d, hd, dx.data(), !first);
    first = false;
  }
  return dx;
}

Tensor multi_head_self_attention(const Tensor& x, const LayerParams& params, std::size_t heads) {
  return MultiHeadAttentionLayer(params, heads).forward(x, ForwardContext{}, nullptr);
}

// ---------------------------------------------------------------------------

TransformerBlockLayer::TransformerBlockLayer(std::unique_ptr<MultiHeadAttentionLayer> attention,
                                             std::unique_ptr<DenseLayer> ffn1,
                                             std::unique_ptr<DenseLayer> ffn2,
                                             std::unique_ptr<LayerNormLayer> norm1,
                                             std::unique_ptr<LayerNormLayer> norm2,
                                             float dropout_rate)
    : attention_(std::move(attention)),
      ffn1_(std::move(ffn1)),
      ffn2_(std::move(ffn2)),
      norm1_(std::move(norm1)),
      norm2_(std::move(norm2)),
      dropout1_(dropout_rate),
      dropout2_(dropout_rate) {}

LayerParams TransformerBlockLayer::params() const {
  LayerParams all = attention_->params();
  for (const Layer* layer : {static_cast<const Layer*>(norm1_.get()), static_cast<const Layer*>(ffn1_.get()),
                             static_cast<const Layer*>(ffn2_.get()), static_cast<const Layer*>(norm2_.get())}) {
    const LayerParams p = layer->params();
    all.insert(all.end(), p.begin(), p.end());
  }
  return all;
}

Tensor TransformerBlockLayer::forward(const Tensor& x, const ForwardContext& ctx,
                                      Cache* cache) const {
  if (cache) cache->children.assign(7, Cache{});
  auto child = [cache](std::size_t i) { return cache ? &cache->children[i] : nullptr; };

  Tensor a = attention_->forward(x, ctx, child(0));
  a = dropout1_.forward(a, ctx, child(1));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += x[i];
  Tensor y = norm1_->forward(a, ctx, child(2));

  Tensor f = ffn1_->forward(y, ctx, child(3));
  f = ffn2_->forward(f, ctx, child(4));
  f = dropout2_.forward(f, ctx, child(5));
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += y[i];
  return norm2_->forward(f, ctx, child(6));
}

Tensor TransformerBlockLayer::backward(const Tensor& dz, const Cache& cache) const {
  if (cache.children.size() != 7) {
    throw StateError("transformer block backward without a recorded forward");
  }
  Tensor dr2 = norm2_->backward(dz, cache.children[6]);
  Tensor df = dropout2_.backward(dr2, cache.children[5]);
  df = ffn2_->backward(df, cache.children[4]);
  df = ffn1_->backward(df, cache.children[3]);
  for (std::size_t i = 0; i < df.size(); ++i) df[i] += dr2[i];

  Tensor dr1 = norm1_->backward(df, cache.children[2]);
  Tensor da = dropout1_.backward(dr1, cache.children[1]);
  Tensor dx = attention_->backward(da, cache.children[0]);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dr1[i];
  return dx;
}

}  // namespace rff
