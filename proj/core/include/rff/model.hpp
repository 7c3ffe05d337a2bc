// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rff/layers.hpp"
#include "rff/rng.hpp"
#include "rff/tensor.hpp"

namespace rff {

enum class Architecture : std::uint8_t { kCnn = 1, kTransformer = 2 };

std::string architecture_name(Architecture arch);
Architecture parse_architecture(const std::string& name);

inline constexpr std::size_t kSignalLength = 256;
// Per-sample model input: 256 (I, Q) rows with a trailing channel axis.
inline const Shape kInputShape = {kSignalLength, 2, 1};

inline constexpr float kDenseL2 = 1e-4f;
inline constexpr float kLayerNormEpsilon = 1e-3f;

struct SummaryRow {
  std::string layer;
  std::string tensor;
  Shape shape;
  std::size_t count = 0;
};

// One of the two classifier architectures: an ordered layer stack plus the
// parameter tensors it reads, enumerated in a fixed builder order that the
// model file format relies on.
class ModelGraph {
 public:
  ModelGraph(const ModelGraph& other);
  ModelGraph& operator=(const ModelGraph& other);
  ModelGraph(ModelGraph&&) noexcept = default;
  ModelGraph& operator=(ModelGraph&&) noexcept = default;
  ~ModelGraph();

  // Skeleton with zeroed kernels; use the builders for initialised weights.
  static ModelGraph skeleton(Architecture arch, std::size_t num_classes);

  Architecture architecture() const noexcept { return arch_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  std::span<Param* const> params() const noexcept { return param_view_; }
  Param& param(const std::string& name) const;
  std::vector<Param*> l2_params() const;
  float l2_factor() const noexcept { return l2_factor_; }

  const std::vector<std::unique_ptr<Layer>>& layers() const noexcept { return layers_; }
  // Output shape of every layer, in order, for one sample.
  std::vector<Shape> layer_output_shapes() const;

  // batch: [B, 256, 2, 1] -> class probabilities [B, num_classes].
  Tensor forward(const Tensor& batch, Mode mode, Rng* rng = nullptr,
                 const LinearBackend* backend = nullptr) const;

  // Like forward() but keeps every layer cache for a following backward().
  Tensor forward_recorded(const Tensor& batch, Mode mode, Rng* rng = nullptr);

  // Gradients of mean cross-entropy + L2 penalty, accumulated into each
  // Param::grad (call zero_grad() first). Returns that loss. Throws
  // StateError unless forward_recorded() ran since the last backward().
  float backward(std::span<const std::size_t> labels);

  // Per-sample forward then backward, without holding a whole batch of
  // caches. Same result as forward_recorded(kTrain) + backward().
  float accumulate_gradients(const Tensor& batch, std::span<const std::size_t> labels, Rng& rng);

  void zero_grad();

 private:
  ModelGraph(Architecture arch, std::size_t num_classes);
  Param* add_param(std::string name, Shape shape, bool l2, bool kernel);
  void build_cnn_layers();
  void build_transformer_layers();

  Tensor forward_sample(const float* sample, const ForwardContext& ctx,
                        std::vector<Cache>* caches) const;
  void backward_sample(const Tensor& probs, std::size_t label, std::size_t batch_size,
                       std::vector<Cache>& caches);

  Architecture arch_;
  std::size_t num_classes_;
  float l2_factor_ = 0.0f;
  std::vector<std::unique_ptr<Param>> params_;
  std::vector<Param*> param_view_;
  std::vector<std::unique_ptr<Layer>> layers_;

  // Recorded by forward_recorded().
  std::vector<std::vector<Cache>> recorded_caches_;
  Tensor recorded_probs_;
};

// Glorot-uniform kernels, zero biases, unit gamma / zero beta.
ModelGraph build_cnn(std::size_t num_classes, std::uint64_t seed = 42);
ModelGraph build_transformer(std::size_t num_classes, std::uint64_t seed = 42);
ModelGraph build_model(Architecture arch, std::size_t num_classes, std::uint64_t seed = 42);

std::size_t param_count(const ModelGraph& model);
std::vector<SummaryRow> summary(const ModelGraph& model);
std::string format_summary(const ModelGraph& model);

// Row i of a [B, ...] tensor as its own tensor.
Tensor batch_item(const Tensor& batch, std::size_t i);

}  // namespace rff
