// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rff/rng.hpp"
#include "rff/tensor.hpp"

namespace rff {

enum class Mode : std::uint8_t { kTrain, kInfer };
enum class Activation : std::uint8_t { kNone, kRelu, kSoftmax };

// One named parameter tensor plus its gradient slot (same shape).
struct Param {
  Param(std::string name_, Tensor value_, bool l2_ = false, bool kernel_ = false);

  void zero_grad() { grad.fill(0.0f); }

  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool l2 = false;         // included in the L2 penalty
  bool is_kernel = false;  // weight matrix (int8 candidate) vs bias/gamma/beta
};

// The parameter tensors of one layer in a fixed order, e.g. {kernel, bias}.
using LayerParams = std::vector<Param*>;

// Computes y[rows, n] = x[rows, k] * kernel + bias. The float implementation is
// a plain GEMM; the int8 inference path swaps in a backend that quantizes x on
// the fly and multiplies against int8 weights.
class LinearBackend {
 public:
  virtual ~LinearBackend() = default;
  // kernel holds k * n values viewed as a row-major [k, n] matrix.
  virtual void linear(const Param& kernel, const Param* bias, const float* x, std::size_t rows,
                      std::size_t k, std::size_t n, float* y) const = 0;
};

const LinearBackend& float_backend();

struct ForwardContext {
  Mode mode = Mode::kInfer;
  Rng* rng = nullptr;  // required in train mode when dropout is active
  const LinearBackend* backend = nullptr;  // nullptr -> float_backend()

  const LinearBackend& linear() const { return backend ? *backend : float_backend(); }
};

// Values saved by forward for use in backward. Layout is private to each layer.
struct Cache {
  std::vector<Tensor> tensors;
  std::vector<std::uint32_t> indices;
  std::vector<Cache> children;
};

// A layer maps one sample (no batch axis) to one sample. backward() consumes
// the cache that the matching forward() filled, accumulates into the
// parameters' grad slots, and returns the input gradient.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual LayerParams params() const { return {}; }

  // cache may be nullptr when no backward pass will follow.
  virtual Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const = 0;
  virtual Tensor backward(const Tensor& dy, const Cache& cache) const = 0;
};

class DenseLayer final : public Layer {
 public:
  // A softmax DenseLayer only ever feeds the cross-entropy loss; its backward
  // takes the gradient with respect to the logits.
  DenseLayer(Param* kernel, Param* bias, Activation activation);

  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& input) const override;
  LayerParams params() const override { return {kernel_, bias_}; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

  Activation activation() const noexcept { return activation_; }

 private:
  Param* kernel_;
  Param* bias_;
  Activation activation_;
};

class Conv2DLayer final : public Layer {
 public:
  Conv2DLayer(Param* kernel, Param* bias, bool relu);

  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& input) const override;
  LayerParams params() const override { return {kernel_, bias_}; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

 private:
  Param* kernel_;
  Param* bias_;
  bool relu_;
};

class MaxPool2DLayer final : public Layer {
 public:
  MaxPool2DLayer(std::size_t pool_h, std::size_t pool_w);

  std::string kind() const override { return "maxpool2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

 private:
  std::size_t pool_h_;
  std::size_t pool_w_;
};

// Reshape to a fixed target shape (flatten, squeeze).
class ReshapeLayer final : public Layer {
 public:
  ReshapeLayer(std::string kind, Shape target);

  std::string kind() const override { return kind_; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

 private:
  std::string kind_;
  Shape target_;
};

class DropoutLayer final : public Layer {
 public:
  explicit DropoutLayer(float rate);

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

  float rate() const noexcept { return rate_; }

 private:
  float rate_;
};

class LayerNormLayer final : public Layer {
 public:
  LayerNormLayer(Param* gamma, Param* beta, float epsilon);

  std::string kind() const override { return "layer_norm"; }
  Shape output_shape(const Shape& input) const override { return input; }
  LayerParams params() const override { return {gamma_, beta_}; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

 private:
  Param* gamma_;
  Param* beta_;
  float epsilon_;
};

class GlobalAveragePoolLayer final : public Layer {
 public:
  std::string kind() const override { return "global_average_pool"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;
};

// Self-attention over x[T, d]. Each projection kernel is [d, heads * key_dim]
// with the heads laid out side by side; the output kernel maps back to d.
class MultiHeadAttentionLayer final : public Layer {
 public:
  // params: query kernel/bias, key kernel/bias, value kernel/bias, output kernel/bias.
  MultiHeadAttentionLayer(const LayerParams& params, std::size_t heads);

  std::string kind() const override { return "multi_head_attention"; }
  Shape output_shape(const Shape& input) const override { return input; }
  LayerParams params() const override { return params_; }
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

  std::size_t heads() const noexcept { return heads_; }
  std::size_t key_dim() const noexcept { return key_dim_; }

 private:
  LayerParams params_;
  std::size_t heads_;
  std::size_t key_dim_;
};

// Post-norm encoder block:
//   y = LN1(x + Dropout(MHA(x)));  z = LN2(y + Dropout(FFN2(ReLU(FFN1(y)))))
class TransformerBlockLayer final : public Layer {
 public:
  TransformerBlockLayer(std::unique_ptr<MultiHeadAttentionLayer> attention,
                        std::unique_ptr<DenseLayer> ffn1, std::unique_ptr<DenseLayer> ffn2,
                        std::unique_ptr<LayerNormLayer> norm1, std::unique_ptr<LayerNormLayer> norm2,
                        float dropout_rate);

  std::string kind() const override { return "transformer_block"; }
  Shape output_shape(const Shape& input) const override { return input; }
  LayerParams params() const override;
  Tensor forward(const Tensor& x, const ForwardContext& ctx, Cache* cache) const override;
  Tensor backward(const Tensor& dy, const Cache& cache) const override;

 private:
  std::unique_ptr<MultiHeadAttentionLayer> attention_;
  std::unique_ptr<DenseLayer> ffn1_;
  std::unique_ptr<DenseLayer> ffn2_;
  std::unique_ptr<LayerNormLayer> norm1_;
  std::unique_ptr<LayerNormLayer> norm2_;
  DropoutLayer dropout1_;
  DropoutLayer dropout2_;
};

// ---------------------------------------------------------------------------
// Functional forms of the layers above, for one sample.

void relu_inplace(std::span<float> x);
// Softmax over rows of length `cols`, stabilised by per-row max subtraction.
void softmax_rows(std::span<float> x, std::size_t cols);

// y[..., d_out] = act(x[..., d_in] W + b)
Tensor dense_forward(const Tensor& x, const LayerParams& params, Activation activation);

// x: [H, W, Cin], kernel: [kh, kw, Cin, Cout], bias: [Cout]. Stride 1, SAME
// zero padding: (kh - 1) / 2 rows on top, the remainder at the bottom; same
// for columns.
Tensor conv2d_forward(const Tensor& x, const LayerParams& params, bool relu);

Tensor maxpool2d_forward(const Tensor& x, std::size_t pool_h, std::size_t pool_w);

Tensor layer_norm_forward(const Tensor& x, const LayerParams& params, float epsilon);

Tensor multi_head_self_attention(const Tensor& x, const LayerParams& params,
                                 std::size_t heads = 2);

// Mean over the first axis of [T, d].
Tensor global_average_pool(const Tensor& x);

// Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).
Tensor dropout_apply(const Tensor& x, float rate, Mode mode, Rng& rng);

// Mean over the batch of -log(max(p[i, label_i], 1e-7)).
float sparse_cce_loss(const Tensor& probs, std::span<const std::size_t> labels);

// factor * sum of squares over the tensors; optionally adds 2 * factor * w to
// each tensor's grad.
float l2_penalty(std::span<Param* const> params, float factor, bool accumulate_grad);

// im2col for SAME-padded stride-1 convolution: row (h * W + w), column
// ((dy * kw + dx) * Cin + c).
void im2col_same(const float* x, std::size_t h, std::size_t w, std::size_t cin, std::size_t kh,
                 std::size_t kw, float* cols);

}  // namespace rff
