// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "rff/errors.hpp"

namespace rff {
namespace {

class Int8Backend final : public LinearBackend {
 public:
  Int8Backend(const std::unordered_map<const Param*, std::size_t>& slots,
              const std::vector<QuantizedTensor>& kernels,
              const std::vector<kernels::PackedInt8Matrix>& packed)
      : slots_(slots), kernels_(kernels), packed_(packed) {}

  void linear(const Param& kernel, const Param* bias, const float* x, std::size_t rows,
              std::size_t k, std::size_t n, float* y) const override {
    const auto it = slots_.find(&kernel);
    if (it == slots_.end()) {
      float_backend().linear(kernel, bias, x, rows, k, n, y);
      return;
    }
    const kernels::PackedInt8Matrix& w = packed_[it->second];
    if (w.k() != k || w.n() != n) throw DimensionError("quantized kernel shape mismatch for " + kernel.name);
    const float w_scale = kernels_[it->second].scale;

    const float max_abs = kernels::max_abs(x, rows * k);
    const float act_scale = max_abs > 0.0f ? max_abs / static_cast<float>(kInt8Max) : 1.0f;
    const std::size_t lda = 2 * w.k_pairs();
    std::vector<std::int16_t> qx(rows * lda, 0);
    if (lda == k) {
      kernels::quantize_s16(x, rows * k, act_scale, qx.data());
    } else {
      for (std::size_t r = 0; r < rows; ++r) kernels::quantize_s16(x + r * k, k, act_scale, qx.data() + r * lda);
    }
    std::vector<std::int32_t> acc(rows * n);
    kernels::gemm_s16(rows, qx.data(), lda, w, acc.data(), n);

    const float rescale = act_scale * w_scale;
    const float* bv = bias ? bias->value.data() : nullptr;
    for (std::size_t r = 0; r < rows; ++r) {
      float* yr = y + r * n;
      const std::int32_t* ar = acc.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) yr[j] = (bv ? bv[j] : 0.0f) + static_cast<float>(ar[j]) * rescale;
    }
  }

 private:
  const std::unordered_map<const Param*, std::size_t>& slots_;
  const std::vector<QuantizedTensor>& kernels_;
  const std::vector<kernels::PackedInt8Matrix>& packed_;
};

}  // namespace

Tensor QuantizedTensor::dequantize() const {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = scale * static_cast<float>(values[i]);
  return Tensor(shape, std::move(out));
}

float int8_scale(std::span<const float> values) {
  const float max_abs = kernels::max_abs(values.data(), values.size());
  return max_abs > 0.0f ? max_abs / static_cast<float>(kInt8Max) : 1.0f;
}

std::int8_t quantize_value(float v, float scale) noexcept {
  std::int16_t q = 0;
  kernels::quantize_s16(&v, 1, scale, &q);
  return static_cast<std::int8_t>(q);
}

QuantizedTensor quantize_tensor(const Tensor& w) {
  if (!w.all_finite()) throw InputError("cannot quantize a tensor with non-finite values");
  QuantizedTensor q;
  q.shape = w.shape();
  q.scale = int8_scale(w.values());
  q.values.reserve(w.size());
  for (float v : w.values()) q.values.push_back(quantize_value(v, q.scale));
  return q;
}

QuantizedModel::QuantizedModel(ModelGraph graph, std::vector<QuantizedTensor> kernels)
    : graph_(std::move(graph)), kernels_(std::move(kernels)) {
  index_kernels();
}

QuantizedModel::QuantizedModel(const QuantizedModel& other)
    : graph_(other.graph_), kernels_(other.kernels_) {
  index_kernels();
}

QuantizedModel& QuantizedModel::operator=(const QuantizedModel& other) {
  if (this != &other) *this = QuantizedModel(other);
  return *this;
}

void QuantizedModel::index_kernels() {
  packed_.clear();
  kernel_slot_.clear();
  std::size_t slot = 0;
  for (Param* p : graph_.params()) {
    if (!p->is_kernel) continue;
    if (slot >= kernels_.size()) throw DimensionError("too few quantized kernels for the architecture");
    QuantizedTensor& q = kernels_[slot];
    if (q.shape != p->value.shape()) {
      throw DimensionError("quantized kernel " + p->name + " has shape " + shape_string(q.shape) +
                           ", expected " + shape_string(p->value.shape()));
    }
    if (!(q.scale > 0.0f) || !std::isfinite(q.scale)) throw InputError("non-positive scale for " + p->name);
    p->value = q.dequantize();
    const std::size_t n = q.shape.back();
    const std::size_t k = q.size() / n;
    packed_.emplace_back(k, n, q.values.data());
    kernel_slot_.emplace(p, slot);
    ++slot;
  }
  if (slot != kernels_.size()) throw DimensionError("too many quantized kernels for the architecture");
}

const QuantizedTensor& QuantizedModel::kernel(const std::string& name) const {
  const auto it = kernel_slot_.find(&graph_.param(name));
  if (it == kernel_slot_.end()) throw ParameterError("'" + name + "' is not a quantized kernel");
  return kernels_[it->second];
}

Tensor QuantizedModel::forward(const Tensor& batch) const {
  const Int8Backend backend(kernel_slot_, kernels_, packed_);
  return graph_.forward(batch, Mode::kInfer, nullptr, &backend);
}

QuantizedModel quantize_model(const ModelGraph& model) {
  std::vector<QuantizedTensor> kernels;
  for (const Param* p : model.params()) {
    if (p->is_kernel) kernels.push_back(quantize_tensor(p->value));
  }
  return QuantizedModel(model, std::move(kernels));
}

Tensor quantized_forward(const QuantizedModel& model, const Tensor& batch) { return model.forward(batch); }

}  // namespace rff
