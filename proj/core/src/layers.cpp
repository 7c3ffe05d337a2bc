// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/layers.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "rff/errors.hpp"
#include "rff/kernels.hpp"
#include "linear_grad.hpp"

namespace rff {
namespace {

class FloatBackend final : public LinearBackend {
 public:
  void linear(const Param& kernel, const Param* bias, const float* x, std::size_t rows,
              std::size_t k, std::size_t n, float* y) const override {
    if (bias) {
      for (std::size_t r = 0; r < rows; ++r) std::copy_n(bias->value.data(), n, y + r * n);
    }
    kernels::gemm(rows, n, k, x, k, kernel.value.data(), n, y, n, bias != nullptr);
  }
};

void require_mode_rng(const ForwardContext& ctx) {
  if (ctx.mode == Mode::kTrain && ctx.rng == nullptr) {
    throw StateError("train-mode forward needs an Rng for dropout");
  }
}

}  // namespace

namespace detail {

void accumulate_bias_grad(const float* dz, std::size_t rows, std::size_t n, float* grad) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) grad[j] += dz[r * n + j];
  }
}

void accumulate_kernel_grad(const float* x, const float* dz, std::size_t rows, std::size_t k,
                            std::size_t n, float* grad) {
  std::vector<float> xt(k * rows);
  kernels::transpose(rows, k, x, k, xt.data(), rows);
  kernels::gemm(k, n, rows, xt.data(), rows, dz, n, grad, n, true);
}

void input_grad(const float* dz, const float* kernel, std::size_t rows, std::size_t k,
                std::size_t n, float* dx, bool accumulate) {
  std::vector<float> wt(n * k);
  kernels::transpose(k, n, kernel, n, wt.data(), k);
  kernels::gemm(rows, k, n, dz, n, wt.data(), k, dx, k, accumulate);
}

}  // namespace detail

using detail::accumulate_bias_grad;
using detail::accumulate_kernel_grad;
using detail::input_grad;

Param::Param(std::string name_, Tensor value_, bool l2_, bool kernel_)
    : name(std::move(name_)),
      value(std::move(value_)),
      grad(value.shape()),
      l2(l2_),
      is_kernel(kernel_) {}

const LinearBackend& float_backend() {
  static const FloatBackend backend;
  return backend;
}

// ---------------------------------------------------------------------------

void relu_inplace(std::span<float> x) {
  for (float& v : x) v = v > 0.0f ? v : 0.0f;
}

void softmax_rows(std::span<float> x, std::size_t cols) {
  if (cols == 0 || x.size() % cols != 0) throw DimensionError("softmax row length mismatch");
  for (std::size_t r = 0; r < x.size() / cols; ++r) kernels::softmax_row(x.data() + r * cols, cols);
}

// ---------------------------------------------------------------------------
// Dense

DenseLayer::DenseLayer(Param* kernel, Param* bias, Activation activation)
    : kernel_(kernel), bias_(bias), activation_(activation) {
  if (kernel_->value.rank() != 2) throw DimensionError("dense kernel must be rank 2");
  if (bias_ && bias_->value.size() != kernel_->value.dim(1)) {
    throw DimensionError("dense bias length must equal kernel columns");
  }
}

Shape DenseLayer::output_shape(const Shape& input) const {
  if (input.empty() || input.back() != kernel_->value.dim(0)) {
    throw DimensionError("dense expects last dim " + std::to_string(kernel_->value.dim(0)) +
                         ", got " + shape_string(input));
  }
  Shape out = input;
  out.back() = kernel_->value.dim(1);
  return out;
}

Tensor DenseLayer::forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t n = kernel_->value.dim(1);
  const std::size_t rows = x.size() / kernel_->value.dim(0);
  Tensor y(out_shape);
  ctx.linear().linear(*kernel_, bias_, x.data(), rows, kernel_->value.dim(0), n, y.data());
  if (activation_ == Activation::kRelu) relu_inplace(y.values());
  if (activation_ == Activation::kSoftmax) softmax_rows(y.values(), n);
  if (cache) {
    cache->tensors = {x, y};
  }
  return y;
}

Tensor DenseLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.size() != 2) throw StateError("dense backward without a recorded forward");
  const Tensor& x = cache.tensors[0];
  const Tensor& y = cache.tensors[1];
  const std::size_t k = kernel_->value.dim(0);
  const std::size_t n = kernel_->value.dim(1);
  const std::size_t rows = x.size() / k;
  Tensor dz = dy;
  if (activation_ == Activation::kRelu) {
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (!(y[i] > 0.0f)) dz[i] = 0.0f;
    }
  }
  accumulate_kernel_grad(x.data(), dz.data(), rows, k, n, kernel_->grad.data());
  if (bias_) accumulate_bias_grad(dz.data(), rows, n, bias_->grad.data());
  Tensor dx(x.shape());
  input_grad(dz.data(), kernel_->value.data(), rows, k, n, dx.data());
  return dx;
}

Tensor dense_forward(const Tensor& x, const LayerParams& params, Activation activation) {
  if (params.empty() || params.size() > 2) throw ParameterError("dense takes {kernel, bias}");
  DenseLayer layer(params[0], params.size() > 1 ? params[1] : nullptr, activation);
  return layer.forward(x, ForwardContext{}, nullptr);
}

// ---------------------------------------------------------------------------
// Conv2D

void im2col_same(const float* x, std::size_t h, std::size_t w, std::size_t cin, std::size_t kh,
                 std::size_t kw, float* cols) {
  const std::ptrdiff_t pad_top = static_cast<std::ptrdiff_t>((kh - 1) / 2);
  const std::ptrdiff_t pad_left = static_cast<std::ptrdiff_t>((kw - 1) / 2);
  const std::size_t row_len = kh * kw * cin;
  for (std::size_t oh = 0; oh < h; ++oh) {
    for (std::size_t ow = 0; ow < w; ++ow) {
      float* dst = cols + (oh * w + ow) * row_len;
      for (std::size_t dy = 0; dy < kh; ++dy) {
        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + dy) - pad_top;
        for (std::size_t dx = 0; dx < kw; ++dx) {
          const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + dx) - pad_left;
          float* tap = dst + (dy * kw + dx) * cin;
          if (ih < 0 || iw < 0 || ih >= static_cast<std::ptrdiff_t>(h) ||
              iw >= static_cast<std::ptrdiff_t>(w)) {
            std::fill_n(tap, cin, 0.0f);
          } else {
            std::copy_n(x + (static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)) * cin,
                        cin, tap);
          }
        }
      }
    }
  }
}

namespace {

void col2im_same(const float* cols, std::size_t h, std::size_t w, std::size_t cin, std::size_t kh,
                 std::size_t kw, float* dx) {
  const std::ptrdiff_t pad_top = static_cast<std::ptrdiff_t>((kh - 1) / 2);
  const std::ptrdiff_t pad_left = static_cast<std::ptrdiff_t>((kw - 1) / 2);
  const std::size_t row_len = kh * kw * cin;
  std::fill_n(dx, h * w * cin, 0.0f);
  for (std::size_t oh = 0; oh < h; ++oh) {
    for (std::size_t ow = 0; ow < w; ++ow) {
      const float* src = cols + (oh * w + ow) * row_len;
      for (std::size_t dy = 0; dy < kh; ++dy) {
        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + dy) - pad_top;
        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t dxi = 0; dxi < kw; ++dxi) {
          const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow + dxi) - pad_left;
          if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
          const float* tap = src + (dy * kw + dxi) * cin;
          float* out = dx + (static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)) * cin;
          for (std::size_t c = 0; c < cin; ++c) out[c] += tap[c];
        }
      }
    }
  }
}

}  // namespace

Conv2DLayer::Conv2DLayer(Param* kernel, Param* bias, bool relu)
    : kernel_(kernel), bias_(bias), relu_(relu) {
  if (kernel_->value.rank() != 4) throw DimensionError("conv2d kernel must be [kh, kw, Cin, Cout]");
  if (bias_ && bias_->value.size() != kernel_->value.dim(3)) {
    throw DimensionError("conv2d bias length must equal Cout");
  }
}

Shape Conv2DLayer::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[2] != kernel_->value.dim(2)) {
    throw DimensionError("conv2d expects [H, W, " + std::to_string(kernel_->value.dim(2)) +
                         "], got " + shape_string(input));
  }
  return {input[0], input[1], kernel_->value.dim(3)};
}

Tensor Conv2DLayer::forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
  const std::size_t kh = kernel_->value.dim(0), kw = kernel_->value.dim(1);
  Tensor cols({h * w, kh * kw * cin});
  im2col_same(x.data(), h, w, cin, kh, kw, cols.data());

  Tensor y(out_shape);
  ctx.linear().linear(*kernel_, bias_, cols.data(), h * w, kh * kw * cin, kernel_->value.dim(3),
                      y.data());
  if (relu_) relu_inplace(y.values());
  if (cache) {
    cache->tensors = {std::move(cols), y};
    cache->indices = {static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w)};
  }
  return y;
}

Tensor Conv2DLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.size() != 2) throw StateError("conv2d backward without a recorded forward");
  const Tensor& cols = cache.tensors[0];
  const Tensor& y = cache.tensors[1];
  const std::size_t h = cache.indices[0], w = cache.indices[1];
  const std::size_t kh = kernel_->value.dim(0), kw = kernel_->value.dim(1);
  const std::size_t cin = kernel_->value.dim(2), cout = kernel_->value.dim(3);
  const std::size_t k = kh * kw * cin;
  const std::size_t rows = h * w;

  Tensor dz = dy;
  if (relu_) {
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (!(y[i] > 0.0f)) dz[i] = 0.0f;
    }
  }
  accumulate_kernel_grad(cols.data(), dz.data(), rows, k, cout, kernel_->grad.data());
  if (bias_) accumulate_bias_grad(dz.data(), rows, cout, bias_->grad.data());

  std::vector<float> dcols(rows * k);
  input_grad(dz.data(), kernel_->value.data(), rows, k, cout, dcols.data());
  Tensor dx({h, w, cin});
  col2im_same(dcols.data(), h, w, cin, kh, kw, dx.data());
  return dx;
}

Tensor conv2d_forward(const Tensor& x, const LayerParams& params, bool relu) {
  if (params.empty() || params.size() > 2) throw ParameterError("conv2d takes {kernel, bias}");
  Conv2DLayer layer(params[0], params.size() > 1 ? params[1] : nullptr, relu);
  return layer.forward(x, ForwardContext{}, nullptr);
}

// ---------------------------------------------------------------------------
// MaxPool2D

MaxPool2DLayer::MaxPool2DLayer(std::size_t pool_h, std::size_t pool_w)
    : pool_h_(pool_h), pool_w_(pool_w) {
  if (pool_h_ == 0 || pool_w_ == 0) throw ParameterError("pool size must be positive");
}

Shape MaxPool2DLayer::output_shape(const Shape& input) const {
  if (input.size() != 3 || input[0] % pool_h_ != 0 || input[1] % pool_w_ != 0) {
    throw DimensionError("maxpool (" + std::to_string(pool_h_) + ", " + std::to_string(pool_w_) +
                         ") needs divisible [H, W, C], got " + shape_string(input));
  }
  return {input[0] / pool_h_, input[1] / pool_w_, input[2]};
}

Tensor MaxPool2DLayer::forward(const Tensor& x, const ForwardContext&, Cache* cache) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t w = x.dim(1), c = x.dim(2);
  const std::size_t oh_n = out_shape[0], ow_n = out_shape[1];
  Tensor y(out_shape);
  std::vector<std::uint32_t> argmax;
  if (cache) argmax.resize(y.size());
  for (std::size_t oh = 0; oh < oh_n; ++oh) {
    for (std::size_t ow = 0; ow < ow_n; ++ow) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((oh * pool_h_) * w + ow * pool_w_) * c + ch;
        for (std::size_t dy = 0; dy < pool_h_; ++dy) {
          for (std::size_t dx = 0; dx < pool_w_; ++dx) {
            const std::size_t idx = ((oh * pool_h_ + dy) * w + ow * pool_w_ + dx) * c + ch;
            if (x[idx] > x[best]) best = idx;  // strict: first maximum wins ties
          }
        }
        const std::size_t out = (oh * ow_n + ow) * c + ch;
        y[out] = x[best];
        if (cache) argmax[out] = static_cast<std::uint32_t>(best);
      }
    }
  }
  if (cache) {
    cache->indices = std::move(argmax);
    cache->tensors = {Tensor({x.dim(0), x.dim(1), x.dim(2)})};
  }
  return y;
}

Tensor MaxPool2DLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.size() != 1) throw StateError("maxpool backward without a recorded forward");
  Tensor dx(cache.tensors[0].shape());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[cache.indices[i]] += dy[i];
  return dx;
}

Tensor maxpool2d_forward(const Tensor& x, std::size_t pool_h, std::size_t pool_w) {
  return MaxPool2DLayer(pool_h, pool_w).forward(x, ForwardContext{}, nullptr);
}

// ---------------------------------------------------------------------------
// Reshape

ReshapeLayer::ReshapeLayer(std::string kind, Shape target)
    : kind_(std::move(kind)), target_(std::move(target)) {}

Shape ReshapeLayer::output_shape(const Shape& input) const {
  if (shape_size(input) != shape_size(target_)) {
    throw DimensionError(kind_ + " cannot map " + shape_string(input) + " to " +
                         shape_string(target_));
  }
  return target_;
}

Tensor ReshapeLayer::forward(const Tensor& x, const ForwardContext&, Cache* cache) const {
  if (cache) cache->tensors = {Tensor(x.shape())};
  return x.reshaped(output_shape(x.shape()));
}

Tensor ReshapeLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.size() != 1) throw StateError(kind_ + " backward without a recorded forward");
  return dy.reshaped(cache.tensors[0].shape());
}

// ---------------------------------------------------------------------------
// Dropout

DropoutLayer::DropoutLayer(float rate) : rate_(rate) {
  if (!(rate_ >= 0.0f && rate_ < 1.0f)) throw ParameterError("dropout rate must be in [0, 1)");
}

Tensor DropoutLayer::forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const {
  if (ctx.mode == Mode::kInfer || rate_ == 0.0f) {
    if (cache) cache->tensors.clear();
    return x;
  }
  require_mode_rng(ctx);
  const float scale = 1.0f / (1.0f - rate_);
  Tensor mask(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool keep = ctx.rng->uniform_float() >= rate_;
    mask[i] = keep ? scale : 0.0f;
    y[i] = x[i] * mask[i];
  }
  if (cache) cache->tensors = {std::move(mask)};
  return y;
}

Tensor DropoutLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.empty()) return dy;  // identity forward
  Tensor dx = dy;
  const Tensor& mask = cache.tensors[0];
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask[i];
  return dx;
}

Tensor dropout_apply(const Tensor& x, float rate, Mode mode, Rng& rng) {
  ForwardContext ctx;
  ctx.mode = mode;
  ctx.rng = &rng;
  return DropoutLayer(rate).forward(x, ctx, nullptr);
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNormLayer::LayerNormLayer(Param* gamma, Param* beta, float epsilon)
    : gamma_(gamma), beta_(beta), epsilon_(epsilon) {
  if (gamma_->value.size() != beta_->value.size()) {
    throw DimensionError("layer norm gamma/beta length mismatch");
  }
}

Tensor LayerNormLayer::forward(const Tensor& x, const ForwardContext&, Cache* cache) const {
  const std::size_t d = gamma_->value.size();
  if (x.rank() == 0 || x.shape().back() != d) {
    throw DimensionError("layer norm expects last dim " + std::to_string(d) + ", got " +
                         shape_string(x.shape()));
  }
  const std::size_t rows = x.size() / d;
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  Tensor inv_std({rows});
  const float* g = gamma_->value.data();
  const float* b = beta_->value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x.data() + r * d;
    float mean = 0.0f;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<float>(d);
    float var = 0.0f;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<float>(d);
    const float inv = 1.0f / std::sqrt(var + epsilon_);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const float xh = (xr[j] - mean) * inv;
      xhat[r * d + j] = xh;
      y[r * d + j] = g[j] * xh + b[j];
    }
  }
  if (cache) cache->tensors = {std::move(xhat), std::move(inv_std)};
  return y;
}

Tensor LayerNormLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.tensors.size() != 2) throw StateError("layer norm backward without a recorded forward");
  const Tensor& xhat = cache.tensors[0];
  const Tensor& inv_std = cache.tensors[1];
  const std::size_t d = gamma_->value.size();
  const std::size_t rows = xhat.size() / d;
  const float* g = gamma_->value.data();
  float* dg = gamma_->grad.data();
  float* db = beta_->grad.data();
  Tensor dx(xhat.shape());
  std::vector<float> dxhat(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* dyr = dy.data() + r * d;
    const float* xhr = xhat.data() + r * d;
    float mean_dxhat = 0.0f;
    float mean_dxhat_xhat = 0.0f;
    for (std::size_t j = 0; j < d; ++j) {
      dg[j] += dyr[j] * xhr[j];
      db[j] += dyr[j];
      dxhat[j] = dyr[j] * g[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhr[j];
    }
    mean_dxhat /= static_cast<float>(d);
    mean_dxhat_xhat /= static_cast<float>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx[r * d + j] = inv_std[r] * (dxhat[j] - mean_dxhat - xhr[j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

Tensor layer_norm_forward(const Tensor& x, const LayerParams& params, float epsilon) {
  if (params.size() != 2) throw ParameterError("layer norm takes {gamma, beta}");
  return LayerNormLayer(params[0], params[1], epsilon).forward(x, ForwardContext{}, nullptr);
}

// ---------------------------------------------------------------------------
// Global average pooling

Shape GlobalAveragePoolLayer::output_shape(const Shape& input) const {
  if (input.size() != 2) throw DimensionError("global average pool expects [T, d]");
  return {input[1]};
}

Tensor GlobalAveragePoolLayer::forward(const Tensor& x, const ForwardContext&,
                                       Cache* cache) const {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t t = x.dim(0), d = x.dim(1);
  Tensor y(out_shape);
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t j = 0; j < d; ++j) y[j] += x[r * d + j];
  }
  const float inv = 1.0f / static_cast<float>(t);
  for (std::size_t j = 0; j < d; ++j) y[j] *= inv;
  if (cache) cache->indices = {static_cast<std::uint32_t>(t)};
  return y;
}

Tensor GlobalAveragePoolLayer::backward(const Tensor& dy, const Cache& cache) const {
  if (cache.indices.size() != 1) throw StateError("pool backward without a recorded forward");
  const std::size_t t = cache.indices[0], d = dy.size();
  const float inv = 1.0f / static_cast<float>(t);
  Tensor dx({t, d});
  for (std::size_t r = 0; r < t; ++r) {
    for (std::size_t j = 0; j < d; ++j) dx[r * d + j] = dy[j] * inv;
  }
  return dx;
}

Tensor global_average_pool(const Tensor& x) {
  return GlobalAveragePoolLayer().forward(x, ForwardContext{}, nullptr);
}

// ---------------------------------------------------------------------------
// Loss and regularisation

float sparse_cce_loss(const Tensor& probs, std::span<const std::size_t> labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw DimensionError("loss expects probs [B, C] with B labels");
  }
  const std::size_t classes = probs.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw InputError("label " + std::to_string(labels[i]) + " out of range for " +
                       std::to_string(classes) + " classes");
    }
    const float p = std::max(probs[i * classes + labels[i]], 1e-7f);
    total += -std::log(static_cast<double>(p));
  }
  return static_cast<float>(total / static_cast<double>(labels.size()));
}

float l2_penalty(std::span<Param* const> params, float factor, bool accumulate_grad) {
  if (factor < 0.0f) throw ParameterError("L2 factor must be non-negative");
  double sum = 0.0;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const float w = p->value[i];
      sum += static_cast<double>(w) * w;
      if (accumulate_grad) p->grad[i] += 2.0f * factor * w;
    }
  }
  return static_cast<float>(factor * sum);
}

}  // namespace rff
