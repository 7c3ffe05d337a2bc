// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

// Every backward pass is compared against central finite differences of a
// scalar loss evaluated by the double-precision reference forward. Relative
// errors are taken over the gradient vector of each tensor:
// |analytic - numeric| / max(|analytic|, |numeric|).

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rff/errors.hpp"
#include "rff/layers.hpp"
#include "rff/model.hpp"
#include "reference_ops.hpp"
#include "test_support.hpp"

namespace rff {
namespace {

namespace ref = testing::reference;
using testing::random_tensor;
using testing::relative_error;
using testing::sample_entries;

constexpr double kStep = 1e-3;
// Whole models hold thousands of ReLU and max-pool units; a 1e-3 step moves
// several of them across a kink, so the model checks use a smaller step.
constexpr double kModelStep = 1e-5;
constexpr double kTolerance = 1e-3;
constexpr std::size_t kMaxEntries = 48;
// Gradients whose norm is below this are compared in absolute terms (a key
// bias, for instance, has an exactly zero gradient through softmax).
constexpr double kGradientFloor = 1e-4;

struct ParamSet {
  std::vector<std::unique_ptr<Param>> owned;

  Param* add(const std::string& name, Tensor value) {
    owned.push_back(std::make_unique<Param>(name, std::move(value)));
    return owned.back().get();
  }
};

using RefForward =
    std::function<ref::Vec(const ref::Vec& x, const std::vector<ref::Vec>& params, Rng& rng)>;

ref::Vec to_double(std::span<const float> v) { return {v.begin(), v.end()}; }

// Central differences of f at the listed entries of v.
std::vector<double> central_difference(ref::Vec& v, const std::vector<std::size_t>& entries,
                                       const std::function<double()>& f, double step = kStep) {
  std::vector<double> out;
  for (std::size_t i : entries) {
    const double saved = v[i];
    v[i] = saved + step;
    const double up = f();
    v[i] = saved - step;
    const double down = f();
    v[i] = saved;
    out.push_back((up - down) / (2 * step));
  }
  return out;
}

// loss = sum(weights * layer(x)). The library layer supplies the analytic
// gradient; the double-precision reference forward supplies the numeric one.
// Dropout masks come from a fresh Rng(seed) on every evaluation.
class LayerCheck {
 public:
  LayerCheck(const Layer& layer, Tensor input, RefForward reference, Mode mode = Mode::kInfer,
             std::uint64_t seed = 5)
      : layer_(layer), input_(std::move(input)), reference_(std::move(reference)), mode_(mode), seed_(seed) {
    weights_ = random_tensor(layer_.output_shape(input_.shape()), seed + 100);
  }

  // Returns the worst relative error over the input and every parameter.
  double run() {
    const LayerParams params = layer_.params();
    for (Param* p : params) p->zero_grad();
    Rng rng(seed_);
    Cache cache;
    const Tensor y = layer_.forward(input_, ForwardContext{mode_, &rng, nullptr}, &cache);
    const Tensor dx = layer_.backward(weights_, cache);

    x_ = to_double(input_.values());
    values_.clear();
    for (Param* p : params) values_.push_back(to_double(p->value.values()));

    // The reference must agree with the layer before its derivatives mean anything.
    Rng ref_rng(seed_);
    const ref::Vec ref_y = reference_(x_, values_, ref_rng);
    EXPECT_LE(testing::max_abs_diff(y.values(), ref_y), 1e-4);

    double worst = compare("input", x_, dx.values());
    for (std::size_t i = 0; i < params.size(); ++i)
      worst = std::max(worst, compare(params[i]->name, values_[i], params[i]->grad.values()));
    return worst;
  }

 private:
  double loss() {
    Rng rng(seed_);
    const ref::Vec y = reference_(x_, values_, rng);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * weights_[i];
    return s;
  }

  double compare(const std::string& what, ref::Vec& values, std::span<const float> analytic) {
    const std::vector<std::size_t> entries = sample_entries(analytic.size(), kMaxEntries, 17);
    const std::vector<double> numeric = central_difference(values, entries, [this] { return loss(); });
    std::vector<double> picked;
    for (std::size_t i : entries) picked.push_back(analytic[i]);
    const double err = relative_error(picked, numeric, kGradientFloor);
    EXPECT_LT(err, kTolerance) << what;
    return err;
  }

  const Layer& layer_;
  Tensor input_;
  RefForward reference_;
  Mode mode_;
  std::uint64_t seed_;
  Tensor weights_;
  ref::Vec x_;
  std::vector<ref::Vec> values_;
};

TEST(Gradient, DenseLinear) {
  ParamSet p;
  DenseLayer layer(p.add("kernel", random_tensor({5, 4}, 1)), p.add("bias", random_tensor({4}, 2)),
                   Activation::kNone);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng&) { return ref::linear(x, 3, 5, w[0], w[1], 4); };
  EXPECT_LT(LayerCheck(layer, random_tensor({3, 5}, 3), oracle).run(), kTolerance);
}

TEST(Gradient, DenseRelu) {
  ParamSet p;
  DenseLayer layer(p.add("kernel", random_tensor({6, 7}, 4)), p.add("bias", random_tensor({7}, 5)),
                   Activation::kRelu);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng&) {
    return ref::relu(ref::linear(x, 1, 6, w[0], w[1], 7));
  };
  EXPECT_LT(LayerCheck(layer, random_tensor({6}, 6), oracle).run(), kTolerance);
}

TEST(Gradient, Conv2DRelu) {
  ParamSet p;
  Conv2DLayer layer(p.add("kernel", random_tensor({3, 2, 2, 3}, 7)), p.add("bias", random_tensor({3}, 8)), true);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng&) {
    return ref::relu(ref::conv_same(x, 6, 2, 2, w[0], 3, 2, 3, w[1]));
  };
  EXPECT_LT(LayerCheck(layer, random_tensor({6, 2, 2}, 9), oracle).run(), kTolerance);
}

TEST(Gradient, Conv2DLinearOddKernel) {
  ParamSet p;
  Conv2DLayer layer(p.add("kernel", random_tensor({3, 1, 3, 2}, 10)), p.add("bias", random_tensor({2}, 11)), false);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng&) {
    return ref::conv_same(x, 5, 3, 3, w[0], 3, 1, 2, w[1]);
  };
  EXPECT_LT(LayerCheck(layer, random_tensor({5, 3, 3}, 12), oracle).run(), kTolerance);
}

TEST(Gradient, MaxPool) {
  MaxPool2DLayer layer(2, 1);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>&, Rng&) { return ref::maxpool(x, 8, 2, 3, 2, 1); };
  EXPECT_LT(LayerCheck(layer, random_tensor({8, 2, 3}, 13), oracle).run(), kTolerance);
}

TEST(Gradient, Flatten) {
  ReshapeLayer layer("flatten", {24});
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>&, Rng&) { return x; };
  EXPECT_LT(LayerCheck(layer, random_tensor({4, 2, 3}, 14), oracle).run(), kTolerance);
}

TEST(Gradient, DropoutTrainMask) {
  DropoutLayer layer(0.5f);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>&, Rng& rng) { return ref::dropout(x, 0.5, rng); };
  EXPECT_LT(LayerCheck(layer, random_tensor({40}, 15), oracle, Mode::kTrain).run(), kTolerance);
}

TEST(Gradient, LayerNorm) {
  ParamSet p;
  LayerNormLayer layer(p.add("gamma", random_tensor({6}, 16, 0.5, 1.5)), p.add("beta", random_tensor({6}, 17)), 1e-3f);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng&) {
    return ref::layer_norm(x, 4, 6, w[0], w[1], static_cast<double>(1e-3f));
  };
  EXPECT_LT(LayerCheck(layer, random_tensor({4, 6}, 18), oracle).run(), kTolerance);
}

TEST(Gradient, GlobalAveragePool) {
  GlobalAveragePoolLayer layer;
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>&, Rng&) { return ref::mean_over_rows(x, 7, 3); };
  EXPECT_LT(LayerCheck(layer, random_tensor({7, 3}, 19), oracle).run(), kTolerance);
}

LayerParams attention_params(ParamSet& set, std::size_t d, std::size_t hk, std::uint64_t seed) {
  LayerParams out;
  for (const char* name : {"query", "key", "value"}) {
    out.push_back(set.add(std::string(name) + "/kernel", random_tensor({d, hk}, seed++, -0.6, 0.6)));
    out.push_back(set.add(std::string(name) + "/bias", random_tensor({hk}, seed++, -0.2, 0.2)));
  }
  out.push_back(set.add("output/kernel", random_tensor({hk, d}, seed++, -0.6, 0.6)));
  out.push_back(set.add("output/bias", random_tensor({d}, seed++, -0.2, 0.2)));
  return out;
}

std::vector<const ref::Vec*> first_eight(const std::vector<ref::Vec>& w) {
  std::vector<const ref::Vec*> out;
  for (std::size_t i = 0; i < 8; ++i) out.push_back(&w[i]);
  return out;
}

TEST(Gradient, MultiHeadAttention) {
  ParamSet p;
  MultiHeadAttentionLayer layer(attention_params(p, 4, 6, 20), 2);
  auto oracle = [](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng&) {
    return ref::attention(x, 5, 4, first_eight(w), 2);
  };
  EXPECT_LT(LayerCheck(layer, random_tensor({5, 4}, 30), oracle).run(), kTolerance);
}

TEST(Gradient, TransformerBlockWithDropout) {
  ParamSet p;
  const std::size_t d = 4, t = 6;
  auto attention = std::make_unique<MultiHeadAttentionLayer>(attention_params(p, d, 6, 40), 2);
  auto norm1 = std::make_unique<LayerNormLayer>(p.add("norm1/gamma", random_tensor({d}, 54, 0.5, 1.5)),
                                                p.add("norm1/beta", random_tensor({d}, 55)), 1e-3f);
  auto ffn1 = std::make_unique<DenseLayer>(p.add("ffn1/kernel", random_tensor({d, 5}, 50)),
                                           p.add("ffn1/bias", random_tensor({5}, 51)), Activation::kRelu);
  auto ffn2 = std::make_unique<DenseLayer>(p.add("ffn2/kernel", random_tensor({5, d}, 52)),
                                           p.add("ffn2/bias", random_tensor({d}, 53)), Activation::kNone);
  auto norm2 = std::make_unique<LayerNormLayer>(p.add("norm2/gamma", random_tensor({d}, 56, 0.5, 1.5)),
                                                p.add("norm2/beta", random_tensor({d}, 57)), 1e-3f);
  TransformerBlockLayer layer(std::move(attention), std::move(ffn1), std::move(ffn2), std::move(norm1),
                              std::move(norm2), 0.1f);
  // params() order: attention (8), norm1, ffn1, ffn2, norm2.
  auto oracle = [&](const ref::Vec& x, const std::vector<ref::Vec>& w, Rng& rng) {
    const double eps = 1e-3f;
    const ref::Vec a = ref::dropout(ref::attention(x, t, d, first_eight(w), 2), 0.1, rng);
    const ref::Vec y = ref::layer_norm(ref::add(a, x), t, d, w[8], w[9], eps);
    ref::Vec f = ref::relu(ref::linear(y, t, d, w[10], w[11], 5));
    f = ref::dropout(ref::linear(f, t, 5, w[12], w[13], d), 0.1, rng);
    return ref::layer_norm(ref::add(f, y), t, d, w[14], w[15], eps);
  };
  EXPECT_LT(LayerCheck(layer, random_tensor({t, d}, 60), oracle, Mode::kTrain).run(), kTolerance);
}

// Cross-entropy plus L2 of a whole model on one sample, dropout active with a
// fixed mask.
void check_model(ModelGraph& model, std::uint64_t seed) {
  // Fresh biases are zero, which puts units fed by an all-zero window exactly
  // on the ReLU kink. Move every non-kernel tensor off its initial value.
  std::uint64_t offset_seed = seed + 1000;
  for (Param* p : model.params()) {
    if (p->is_kernel) continue;
    const Tensor noise = random_tensor(p->value.shape(), offset_seed++, -0.1, 0.1);
    for (std::size_t i = 0; i < noise.size(); ++i) p->value[i] += noise[i];
  }
  const Tensor batch = random_tensor({1, 256, 2, 1}, seed);
  const std::size_t label = 3;
  const std::vector<std::size_t> labels = {label};
  const std::uint64_t dropout_seed = seed + 1;

  model.zero_grad();
  Rng rng(dropout_seed);
  const float reported = model.accumulate_gradients(batch, labels, rng);

  ref::Params values;
  for (const Param* p : model.params()) values[p->name] = to_double(p->value.values());
  std::vector<std::string> l2_names;
  for (const Param* p : model.l2_params()) l2_names.push_back(p->name);
  const ref::Vec input = to_double(batch.values());
  const bool cnn = model.architecture() == Architecture::kCnn;
  auto loss = [&] {
    Rng r(dropout_seed);
    const ref::Vec logits = cnn ? ref::cnn_logits(values, input, r) : ref::transformer_logits(values, input, r);
    return ref::loss(logits, label, values, l2_names, model.l2_factor());
  };
  EXPECT_NEAR(reported, loss(), 1e-5);

  for (const Param* p : model.params()) {
    const std::vector<std::size_t> entries = sample_entries(p->value.size(), 24, seed + p->value.size());
    const std::vector<double> numeric = central_difference(values[p->name], entries, loss, kModelStep);
    std::vector<double> analytic;
    for (std::size_t i : entries) analytic.push_back(p->grad[i]);
    EXPECT_LT(relative_error(analytic, numeric, kGradientFloor), kTolerance) << p->name;
  }
}

TEST(Gradient, FullCnn) {
  ModelGraph model = build_cnn(10, 7);
  check_model(model, 70);
}

TEST(Gradient, FullTransformer) {
  ModelGraph model = build_transformer(10, 8);
  check_model(model, 80);
}

TEST(Gradient, BackwardBeforeForwardIsStateError) {
  ModelGraph model = build_cnn(4, 1);
  const std::vector<std::size_t> labels = {0};
  EXPECT_THROW(model.backward(labels), StateError);
}

}  // namespace
}  // namespace rff
