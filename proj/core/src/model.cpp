// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/model.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <utility>

#include "rff/errors.hpp"

namespace rff {
namespace {

constexpr std::size_t kEmbedDim = 64;
constexpr std::size_t kHeads = 2;
constexpr std::size_t kKeyDim = 64;
constexpr std::size_t kFfnDim = 64;
constexpr std::size_t kHeadUnits = 64;
constexpr float kTransformerDropout = 0.1f;
constexpr float kCnnDropout = 0.5f;

void check_classes(std::size_t num_classes) {
  if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
  if (num_classes > 65535) throw ParameterError("num_classes must fit in 16 bits");
}

std::string layer_of(const std::string& tensor_name) {
  const auto slash = tensor_name.rfind('/');
  return slash == std::string::npos ? tensor_name : tensor_name.substr(0, slash);
}

void glorot_uniform(Tensor& kernel, Rng& rng) {
  const Shape& s = kernel.shape();
  std::size_t receptive = 1;
  for (std::size_t i = 0; i + 2 < s.size(); ++i) receptive *= s[i];
  const double fan_in = static_cast<double>(s[s.size() - 2] * receptive);
  const double fan_out = static_cast<double>(s.back() * receptive);
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (float& v : kernel.values()) v = static_cast<float>(rng.uniform(-limit, limit));
}

}  // namespace

std::string architecture_name(Architecture arch) {
  return arch == Architecture::kCnn ? "cnn" : "transformer";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "cnn") return Architecture::kCnn;
  if (name == "transformer") return Architecture::kTransformer;
  throw ConfigError("unknown architecture '" + name + "' (expected cnn or transformer)");
}

ModelGraph::ModelGraph(Architecture arch, std::size_t num_classes)
    : arch_(arch), num_classes_(num_classes) {
  check_classes(num_classes);
  if (arch_ == Architecture::kCnn) {
    build_cnn_layers();
  } else if (arch_ == Architecture::kTransformer) {
    build_transformer_layers();
  } else {
    throw ParameterError("unknown architecture id");
  }
}

ModelGraph::~ModelGraph() = default;

ModelGraph::ModelGraph(const ModelGraph& other) : ModelGraph(other.arch_, other.num_classes_) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i]->value = other.params_[i]->value;
    params_[i]->grad = other.params_[i]->grad;
    params_[i]->trainable = other.params_[i]->trainable;
  }
}

ModelGraph& ModelGraph::operator=(const ModelGraph& other) {
  if (this != &other) *this = ModelGraph(other);
  return *this;
}

ModelGraph ModelGraph::skeleton(Architecture arch, std::size_t num_classes) {
  return ModelGraph(arch, num_classes);
}

Param* ModelGraph::add_param(std::string name, Shape shape, bool l2, bool kernel) {
  params_.push_back(std::make_unique<Param>(std::move(name), Tensor(std::move(shape)), l2, kernel));
  param_view_.push_back(params_.back().get());
  return params_.back().get();
}

void ModelGraph::build_cnn_layers() {
  l2_factor_ = kDenseL2;
  struct ConvSpec {
    const char* name;
    std::size_t kh, kw, cin, cout;
    bool pool;
  };
  const ConvSpec convs[] = {{"conv1", 3, 2, 1, 8, true},
                            {"conv2", 3, 2, 8, 16, true},
                            {"conv3", 3, 1, 16, 32, true},
                            {"conv4", 3, 1, 32, 16, false}};
  for (const ConvSpec& c : convs) {
    Param* kernel = add_param(std::string(c.name) + "/kernel", {c.kh, c.kw, c.cin, c.cout}, false, true);
    Param* bias = add_param(std::string(c.name) + "/bias", {c.cout}, false, false);
    layers_.push_back(std::make_unique<Conv2DLayer>(kernel, bias, true));
    if (c.pool) layers_.push_back(std::make_unique<MaxPool2DLayer>(2, 1));
  }
  layers_.push_back(std::make_unique<ReshapeLayer>("flatten", Shape{32 * 2 * 16}));

  struct DenseSpec {
    const char* name;
    std::size_t in, out;
    Activation act;
  };
  const DenseSpec denses[] = {{"dense1", 1024, 100, Activation::kRelu},
                              {"dense2", 100, 80, Activation::kRelu},
                              {"output", 80, num_classes_, Activation::kSoftmax}};
  for (const DenseSpec& d : denses) {
    if (d.act == Activation::kSoftmax) layers_.push_back(std::make_unique<DropoutLayer>(kCnnDropout));
    Param* kernel = add_param(std::string(d.name) + "/kernel", {d.in, d.out}, true, true);
    Param* bias = add_param(std::string(d.name) + "/bias", {d.out}, false, false);
    layers_.push_back(std::make_unique<DenseLayer>(kernel, bias, d.act));
  }
}

void ModelGraph::build_transformer_layers() {
  l2_factor_ = 0.0f;
  layers_.push_back(std::make_unique<ReshapeLayer>("squeeze", Shape{kSignalLength, 2}));

  Param* embed_k = add_param("embedding/kernel", {2, kEmbedDim}, false, true);
  Param* embed_b = add_param("embedding/bias", {kEmbedDim}, false, false);
  layers_.push_back(std::make_unique<DenseLayer>(embed_k, embed_b, Activation::kNone));

  LayerParams attention;
  for (const char* proj : {"query", "key", "value"}) {
    attention.push_back(add_param(std::string("attention/") + proj + "/kernel",
                                  {kEmbedDim, kHeads * kKeyDim}, false, true));
    attention.push_back(add_param(std::string("attention/") + proj + "/bias", {kHeads * kKeyDim},
                                  false, false));
  }
  attention.push_back(add_param("attention/output/kernel", {kHeads * kKeyDim, kEmbedDim}, false, true));
  attention.push_back(add_param("attention/output/bias", {kEmbedDim}, false, false));

  Param* g1 = add_param("norm1/gamma", {kEmbedDim}, false, false);
  Param* b1 = add_param("norm1/beta", {kEmbedDim}, false, false);
  Param* f1k = add_param("ffn1/kernel", {kEmbedDim, kFfnDim}, false, true);
  Param* f1b = add_param("ffn1/bias", {kFfnDim}, false, false);
  Param* f2k = add_param("ffn2/kernel", {kFfnDim, kEmbedDim}, false, true);
  Param* f2b = add_param("ffn2/bias", {kEmbedDim}, false, false);
  Param* g2 = add_param("norm2/gamma", {kEmbedDim}, false, false);
  Param* b2 = add_param("norm2/beta", {kEmbedDim}, false, false);
  g1->value.fill(1.0f);
  g2->value.fill(1.0f);

  layers_.push_back(std::make_unique<TransformerBlockLayer>(
      std::make_unique<MultiHeadAttentionLayer>(attention, kHeads),
      std::make_unique<DenseLayer>(f1k, f1b, Activation::kRelu),
      std::make_unique<DenseLayer>(f2k, f2b, Activation::kNone),
      std::make_unique<LayerNormLayer>(g1, b1, kLayerNormEpsilon),
      std::make_unique<LayerNormLayer>(g2, b2, kLayerNormEpsilon), kTransformerDropout));
  layers_.push_back(std::make_unique<GlobalAveragePoolLayer>());

  Param* hk = add_param("head/kernel", {kEmbedDim, kHeadUnits}, false, true);
  Param* hb = add_param("head/bias", {kHeadUnits}, false, false);
  layers_.push_back(std::make_unique<DenseLayer>(hk, hb, Activation::kRelu));
  layers_.push_back(std::make_unique<DropoutLayer>(kTransformerDropout));
  Param* ok = add_param("output/kernel", {kHeadUnits, num_classes_}, false, true);
  Param* ob = add_param("output/bias", {num_classes_}, false, false);
  layers_.push_back(std::make_unique<DenseLayer>(ok, ob, Activation::kSoftmax));
}

Param& ModelGraph::param(const std::string& name) const {
  for (Param* p : param_view_) {
    if (p->name == name) return *p;
  }
  throw ParameterError("no parameter named '" + name + "'");
}

std::vector<Param*> ModelGraph::l2_params() const {
  std::vector<Param*> out;
  for (Param* p : param_view_) {
    if (p->l2) out.push_back(p);
  }
  return out;
}

std::vector<Shape> ModelGraph::layer_output_shapes() const {
  std::vector<Shape> shapes;
  Shape current = kInputShape;
  for (const auto& layer : layers_) {
    current = layer->output_shape(current);
    shapes.push_back(current);
  }
  return shapes;
}

namespace {

void check_batch(const Tensor& batch) {
  if (batch.rank() != 4 || batch.dim(1) != kInputShape[0] || batch.dim(2) != kInputShape[1] ||
      batch.dim(3) != kInputShape[2]) {
    throw DimensionError("model input must be [B, 256, 2, 1], got " + shape_string(batch.shape()));
  }
}

}  // namespace

Tensor ModelGraph::forward_sample(const float* sample, const ForwardContext& ctx,
                                  std::vector<Cache>* caches) const {
  Tensor x(kInputShape, std::vector<float>(sample, sample + shape_size(kInputShape)));
  if (caches) caches->assign(layers_.size(), Cache{});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i]->forward(x, ctx, caches ? &(*caches)[i] : nullptr);
  }
  return x;
}

Tensor ModelGraph::forward(const Tensor& batch, Mode mode, Rng* rng,
                           const LinearBackend* backend) const {
  check_batch(batch);
  ForwardContext ctx{mode, rng, backend};
  const std::size_t b = batch.dim(0);
  const std::size_t stride = shape_size(kInputShape);
  Tensor probs({b, num_classes_});
  for (std::size_t i = 0; i < b; ++i) {
    const Tensor p = forward_sample(batch.data() + i * stride, ctx, nullptr);
    std::copy(p.values().begin(), p.values().end(), probs.data() + i * num_classes_);
  }
  return probs;
}

Tensor ModelGraph::forward_recorded(const Tensor& batch, Mode mode, Rng* rng) {
  check_batch(batch);
  ForwardContext ctx{mode, rng, nullptr};
  const std::size_t b = batch.dim(0);
  const std::size_t stride = shape_size(kInputShape);
  recorded_caches_.assign(b, {});
  Tensor probs({b, num_classes_});
  for (std::size_t i = 0; i < b; ++i) {
    const Tensor p = forward_sample(batch.data() + i * stride, ctx, &recorded_caches_[i]);
    std::copy(p.values().begin(), p.values().end(), probs.data() + i * num_classes_);
  }
  recorded_probs_ = probs;
  return probs;
}

void ModelGraph::backward_sample(const Tensor& probs, std::size_t label, std::size_t batch_size,
                                 std::vector<Cache>& caches) {
  // Softmax + cross-entropy fused: d(loss)/d(logits) = (p - onehot) / B.
  Tensor grad = probs;
  grad[label] -= 1.0f;
  const float inv_b = 1.0f / static_cast<float>(batch_size);
  for (float& g : grad.values()) g *= inv_b;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    grad = layers_[i]->backward(grad, caches[i]);
  }
}

float ModelGraph::backward(std::span<const std::size_t> labels) {
  if (recorded_caches_.empty()) throw StateError("backward() called before forward_recorded()");
  const std::size_t b = recorded_caches_.size();
  if (labels.size() != b) throw DimensionError("backward needs one label per recorded sample");
  const float data_loss = sparse_cce_loss(recorded_probs_, labels);
  for (std::size_t i = 0; i < b; ++i) {
    Tensor p({num_classes_}, std::vector<float>(recorded_probs_.data() + i * num_classes_,
                                                recorded_probs_.data() + (i + 1) * num_classes_));
    backward_sample(p, labels[i], b, recorded_caches_[i]);
  }
  recorded_caches_.clear();
  const std::vector<Param*> reg = l2_params();
  return data_loss + l2_penalty(reg, l2_factor_, true);
}

float ModelGraph::accumulate_gradients(const Tensor& batch, std::span<const std::size_t> labels,
                                       Rng& rng) {
  check_batch(batch);
  const std::size_t b = batch.dim(0);
  if (labels.size() != b) throw DimensionError("one label per sample required");
  for (std::size_t label : labels) {
    if (label >= num_classes_) throw InputError("label out of range: " + std::to_string(label));
  }
  ForwardContext ctx{Mode::kTrain, &rng, nullptr};
  const std::size_t stride = shape_size(kInputShape);
  Tensor probs({b, num_classes_});
  std::vector<Cache> caches;
  for (std::size_t i = 0; i < b; ++i) {
    const Tensor p = forward_sample(batch.data() + i * stride, ctx, &caches);
    std::copy(p.values().begin(), p.values().end(), probs.data() + i * num_classes_);
    backward_sample(p, labels[i], b, caches);
  }
  const std::vector<Param*> reg = l2_params();
  return sparse_cce_loss(probs, labels) + l2_penalty(reg, l2_factor_, true);
}

void ModelGraph::zero_grad() {
  for (Param* p : param_view_) p->zero_grad();
}

ModelGraph build_model(Architecture arch, std::size_t num_classes, std::uint64_t seed) {
  ModelGraph model = ModelGraph::skeleton(arch, num_classes);
  Rng rng(seed);
  for (Param* p : model.params()) {
    if (p->is_kernel) glorot_uniform(p->value, rng);
  }
  return model;
}

ModelGraph build_cnn(std::size_t num_classes, std::uint64_t seed) {
  return build_model(Architecture::kCnn, num_classes, seed);
}

ModelGraph build_transformer(std::size_t num_classes, std::uint64_t seed) {
  return build_model(Architecture::kTransformer, num_classes, seed);
}

std::size_t param_count(const ModelGraph& model) {
  std::size_t total = 0;
  for (const Param* p : model.params()) {
    if (p->trainable) total += p->value.size();
  }
  return total;
}

std::vector<SummaryRow> summary(const ModelGraph& model) {
  std::vector<SummaryRow> rows;
  for (const Param* p : model.params()) {
    rows.push_back({layer_of(p->name), p->name, p->value.shape(), p->value.size()});
  }
  return rows;
}

std::string format_summary(const ModelGraph& model) {
  std::ostringstream out;
  out << architecture_name(model.architecture()) << " (" << model.num_classes() << " classes)\n";
  out << std::left << std::setw(28) << "tensor" << std::setw(20) << "shape" << "params\n";
  for (const SummaryRow& row : summary(model)) {
    out << std::left << std::setw(28) << row.tensor << std::setw(20) << shape_string(row.shape)
        << row.count << '\n';
  }
  out << "total trainable parameters: " << param_count(model) << '\n';
  return out.str();
}

Tensor batch_item(const Tensor& batch, std::size_t i) {
  if (batch.rank() < 2 || i >= batch.dim(0)) throw DimensionError("batch index out of range");
  Shape item(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t n = shape_size(item);
  return Tensor(item, std::vector<float>(batch.data() + i * n, batch.data() + (i + 1) * n));
}

}  // namespace rff
