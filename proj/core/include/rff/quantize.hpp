// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "rff/kernels.hpp"
#include "rff/model.hpp"
#include "rff/tensor.hpp"

namespace rff {

inline constexpr int kInt8Max = 127;

// Symmetric per-tensor int8 codes: value ~= scale * q, q in [-127, 127].
struct QuantizedTensor {
  Shape shape;
  std::vector<std::int8_t> values;
  float scale = 1.0f;

  std::size_t size() const noexcept { return values.size(); }
  Tensor dequantize() const;
  bool operator==(const QuantizedTensor&) const = default;
};

// scale = max|w| / 127 (1 for an all-zero tensor), codes rounded half away
// from zero. Throws InputError on non-finite input.
QuantizedTensor quantize_tensor(const Tensor& w);
float int8_scale(std::span<const float> values);
// round-half-away-from-zero(v / scale) clamped to [-127, 127].
std::int8_t quantize_value(float v, float scale) noexcept;

// Dynamic-range int8 model: every kernel is stored as int8 and its matmuls
// run on quantized activations with int32 accumulation; biases and
// normalisation parameters stay float.
class QuantizedModel {
 public:
  // Assemble from a graph whose non-kernel parameters are already set and one
  // quantized tensor per kernel in builder order.
  QuantizedModel(ModelGraph graph, std::vector<QuantizedTensor> kernels);

  QuantizedModel(QuantizedModel&&) noexcept = default;
  QuantizedModel& operator=(QuantizedModel&&) noexcept = default;
  QuantizedModel(const QuantizedModel& other);
  QuantizedModel& operator=(const QuantizedModel& other);

  Architecture architecture() const noexcept { return graph_.architecture(); }
  std::size_t num_classes() const noexcept { return graph_.num_classes(); }

  // Float view: kernels hold their dequantized values.
  const ModelGraph& graph() const noexcept { return graph_; }
  // Quantized kernels in builder order.
  const std::vector<QuantizedTensor>& kernels() const noexcept { return kernels_; }
  const QuantizedTensor& kernel(const std::string& name) const;

  // [B, 256, 2, 1] -> probabilities [B, num_classes]. Thread-safe.
  Tensor forward(const Tensor& batch) const;

 private:
  void index_kernels();

  ModelGraph graph_;
  std::vector<QuantizedTensor> kernels_;
  std::vector<kernels::PackedInt8Matrix> packed_;
  std::unordered_map<const Param*, std::size_t> kernel_slot_;
};

QuantizedModel quantize_model(const ModelGraph& model);
Tensor quantized_forward(const QuantizedModel& model, const Tensor& batch);

}  // namespace rff
