// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include <gtest/gtest.h>

#include "rff/errors.hpp"
#include "rff/model_io.hpp"
#include "rff/quantize.hpp"
#include "test_support.hpp"

namespace rff {
namespace {

using testing::random_tensor;

std::size_t argmax_row(const Tensor& probs, std::size_t r) {
  const std::size_t c = probs.dim(1);
  const float* row = probs.data() + r * c;
  return static_cast<std::size_t>(std::max_element(row, row + c) - row);
}

TEST(QuantizeTensor, HalfAndMinusOne) {
  const QuantizedTensor q = quantize_tensor(Tensor({2}, std::vector<float>{0.5f, -1.0f}));
  EXPECT_FLOAT_EQ(q.scale, 1.0f / 127.0f);
  EXPECT_EQ(q.values, (std::vector<std::int8_t>{64, -127}));
  const Tensor d = q.dequantize();
  EXPECT_NEAR(d[0], 0.50394, 1e-5);
  EXPECT_NEAR(d[1], -1.0, 1e-6);
}

TEST(QuantizeTensor, AllZeroFallsBackToUnitScale) {
  const QuantizedTensor q = quantize_tensor(Tensor({3, 2}));
  EXPECT_EQ(q.scale, 1.0f);
  EXPECT_EQ(q.values, std::vector<std::int8_t>(6, 0));
  EXPECT_EQ(q.shape, (Shape{3, 2}));
}

TEST(QuantizeTensor, RoundTripWithinHalfScale) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Tensor w = random_tensor({37, 11}, seed, -3.0 * seed, 2.0 * seed);
    const QuantizedTensor q = quantize_tensor(w);
    for (std::size_t i = 0; i < w.size(); ++i) {
      ASSERT_LE(std::abs(double(w[i]) - double(q.scale) * q.values[i]), q.scale / 2.0 * (1 + 1e-6));
      ASSERT_GE(q.values[i], -127);
    }
  }
}

TEST(QuantizeTensor, LargestMagnitudeMapsTo127) {
  const QuantizedTensor q = quantize_tensor(random_tensor({50}, 3, -4, 1));
  int widest = 0;
  for (std::int8_t v : q.values) widest = std::max(widest, std::abs(int(v)));
  EXPECT_EQ(widest, 127);
}

TEST(QuantizeTensor, HalfwayRoundsAwayFromZero) {
  const float scale = 0.25f;
  EXPECT_EQ(quantize_value(0.125f, scale), 1);
  EXPECT_EQ(quantize_value(-0.125f, scale), -1);
  EXPECT_EQ(quantize_value(0.375f, scale), 2);
  EXPECT_EQ(quantize_value(-0.375f, scale), -2);
  EXPECT_EQ(quantize_value(0.1f, scale), 0);
  EXPECT_EQ(quantize_value(1000.0f, scale), 127);
  EXPECT_EQ(quantize_value(-1000.0f, scale), -127);
}

TEST(QuantizeTensor, NonFiniteIsInputError) {
  EXPECT_THROW(quantize_tensor(Tensor({2}, std::vector<float>{1.0f, NAN})), InputError);
  EXPECT_THROW(quantize_tensor(Tensor({1}, std::numeric_limits<float>::infinity())), InputError);
}

TEST(QuantizeTensor, IdempotentOnDequantizedValues) {
  const QuantizedTensor q = quantize_tensor(random_tensor({64, 9}, 4));
  EXPECT_EQ(quantize_tensor(q.dequantize()).values, q.values);
}

TEST(QuantizeModel, CnnKernelsInt8BiasesFloat) {
  const ModelGraph cnn = build_cnn(28);
  const QuantizedModel q = quantize_model(cnn);
  EXPECT_EQ(q.kernels().size(), 7u);
  std::size_t float_tensors = 0;
  for (const Param* p : q.graph().params()) float_tensors += !p->is_kernel;
  EXPECT_EQ(float_tensors, 7u);
  EXPECT_EQ(q.kernel("dense1/kernel").shape, (Shape{1024, 100}));
  EXPECT_THROW(q.kernel("dense1/bias"), Error);
}

TEST(QuantizeModel, TransformerKernels) {
  const QuantizedModel q = quantize_model(build_transformer(28));
  std::vector<std::string> names;
  for (const Param* p : q.graph().params())
    if (p->is_kernel) names.push_back(p->name);
  EXPECT_EQ(names, (std::vector<std::string>{"embedding/kernel", "attention/query/kernel", "attention/key/kernel",
                                             "attention/value/kernel", "attention/output/kernel", "ffn1/kernel",
                                             "ffn2/kernel", "head/kernel", "output/kernel"}));
  EXPECT_EQ(q.kernels().size(), 9u);
  EXPECT_EQ(q.graph().params().size() - 9u, 13u);
}

TEST(QuantizeModel, KeepsStructureAndFloatParams) {
  const ModelGraph m = build_transformer(5, 2);
  const QuantizedModel q = quantize_model(m);
  ASSERT_EQ(q.graph().params().size(), m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const Param& a = *m.params()[i];
    const Param& b = *q.graph().params()[i];
    EXPECT_EQ(a.name, b.name);
    EXPECT_EQ(a.value.shape(), b.value.shape());
    if (!a.is_kernel) EXPECT_EQ(a.value, b.value);
  }
}

TEST(QuantizeModel, RequantizingIsAFixedPoint) {
  const QuantizedModel q = quantize_model(build_cnn(6, 3));
  const QuantizedModel again = quantize_model(q.graph());
  EXPECT_EQ(again.kernels(), q.kernels());
}

// With selection-matrix kernels whose codes are exact, and the previous
// activation already on an exact int8 grid, every quantized matmul is exact.
TEST(QuantizedForward, ExactlyRepresentableModelMatchesFloat) {
  ModelGraph m = build_cnn(4, 5);
  m.param("dense1/kernel").value.fill(0.0f);
  Tensor& b1 = m.param("dense1/bias").value;
  for (std::size_t i = 0; i < b1.size(); ++i) b1[i] = static_cast<float>((i * 37) % 128) / 64.0f;
  b1[0] = 127.0f / 64.0f;
  Tensor& k2 = m.param("dense2/kernel").value;
  k2.fill(0.0f);
  for (std::size_t j = 0; j < 80; ++j) k2[j * 80 + j] = 1.0f;
  m.param("dense2/bias").value.fill(0.0f);
  Tensor& k3 = m.param("output/kernel").value;
  k3.fill(0.0f);
  const std::int8_t codes[] = {127, -64, 3, -100};
  for (std::size_t j = 0; j < 4; ++j) k3[j * 4 + j] = codes[j] * (2.0f / 127.0f);
  m.param("output/bias").value = Tensor({4}, std::vector<float>{0.1f, -0.2f, 0.3f, 0.0f});

  const QuantizedModel q = quantize_model(m);
  const Tensor x = random_tensor({2, 256, 2, 1}, 6, -0.5, 0.5);
  // Compare logits through the log of the probabilities.
  const Tensor pf = m.forward(x, Mode::kInfer);
  const Tensor pq = q.forward(x);
  for (std::size_t i = 0; i < pf.size(); ++i) EXPECT_NEAR(std::log(pq[i]) - std::log(pf[i]), 0.0, 1e-5);
}

TEST(QuantizedForward, RowsSumToOneAndTrackFloat) {
  for (Architecture arch : {Architecture::kCnn, Architecture::kTransformer}) {
    const ModelGraph m = build_model(arch, 10, 7);
    const QuantizedModel q = quantize_model(m);
    const Tensor x = random_tensor({8, 256, 2, 1}, 8, -2, 2);
    const Tensor pq = quantized_forward(q, x);
    const Tensor pf = m.forward(x, Mode::kInfer);
    for (std::size_t r = 0; r < 8; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 10; ++c) s += pq.at(r, c);
      EXPECT_NEAR(s, 1.0, 1e-5);
    }
    EXPECT_LE(max_abs_diff(pq, pf), 0.05f);
  }
}

TEST(QuantizedForward, WrongShape) {
  const QuantizedModel q = quantize_model(build_cnn(3));
  EXPECT_THROW(q.forward(Tensor({1, 255, 2, 1})), DimensionError);
}

TEST(QuantizedForward, ConcurrentCallsAgree) {
  const QuantizedModel q = quantize_model(build_transformer(6, 9));
  const Tensor x = random_tensor({2, 256, 2, 1}, 10);
  const Tensor expected = q.forward(x);
  std::vector<Tensor> results(4);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < results.size(); ++t) threads.emplace_back([&, t] { results[t] = q.forward(x); });
  for (std::thread& t : threads) t.join();
  for (const Tensor& r : results) EXPECT_EQ(r, expected);
}

TEST(QuantizedForward, CopyBehavesLikeOriginal) {
  const QuantizedModel q = quantize_model(build_cnn(5, 2));
  const QuantizedModel copy = q;
  const Tensor x = random_tensor({1, 256, 2, 1}, 3);
  EXPECT_EQ(copy.forward(x), q.forward(x));
}

// Serialisation

TEST(ModelFile, FloatRoundTrip) {
  testing::TempDir dir;
  const ModelGraph m = build_transformer(7, 4);
  save_model(m, dir / "m.rffm");
  const ModelGraph back = load_float_model(dir / "m.rffm");
  const Tensor x = random_tensor({2, 256, 2, 1}, 5);
  EXPECT_EQ(back.forward(x, Mode::kInfer), m.forward(x, Mode::kInfer));
  save_model(back, dir / "again.rffm");
  EXPECT_EQ(testing::read_bytes(dir / "m.rffm"), testing::read_bytes(dir / "again.rffm"));
}

TEST(ModelFile, QuantizedRoundTrip) {
  testing::TempDir dir;
  const QuantizedModel q = quantize_model(build_cnn(7, 4));
  save_model(q, dir / "q.rffm");
  const QuantizedModel back = load_quantized_model(dir / "q.rffm");
  EXPECT_EQ(back.kernels(), q.kernels());
  const Tensor x = random_tensor({2, 256, 2, 1}, 6);
  EXPECT_EQ(back.forward(x), q.forward(x));
  save_model(back, dir / "again.rffm");
  EXPECT_EQ(testing::read_bytes(dir / "q.rffm"), testing::read_bytes(dir / "again.rffm"));
  const AnyModel any = load_model(dir / "q.rffm");
  EXPECT_TRUE(is_quantized(any));
  EXPECT_EQ(architecture_of(any), Architecture::kCnn);
  EXPECT_EQ(num_classes_of(any), 7u);
  EXPECT_EQ(predict(any, x), q.forward(x));
}

TEST(ModelFile, WrongKindIsConfigError) {
  testing::TempDir dir;
  save_model(build_cnn(3), dir / "f.rffm");
  save_model(quantize_model(build_cnn(3)), dir / "q.rffm");
  EXPECT_THROW(load_quantized_model(dir / "f.rffm"), ConfigError);
  EXPECT_THROW(load_float_model(dir / "q.rffm"), ConfigError);
}

TEST(ModelFile, SizesTrackPayload) {
  const std::size_t float_cnn = encode_model(build_cnn(28)).size();
  const std::size_t float_tf = encode_model(build_transformer(28)).size();
  const std::size_t q_cnn = encode_model(quantize_model(build_cnn(28))).size();
  const std::size_t q_tf = encode_model(quantize_model(build_transformer(28))).size();
  EXPECT_GE(float_cnn, 4u * 116808u);
  EXPECT_LT(float_cnn, 480u * 1024u);
  EXPECT_GE(float_tf, 4u * 47964u);
  EXPECT_LE(q_cnn, 130u * 1024u);
  EXPECT_LE(q_tf, 80u * 1024u);
  EXPECT_LE(double(q_cnn) / float_cnn, 0.45);
  EXPECT_LE(double(q_tf) / float_tf, 0.45);
}

TEST(ModelFile, HeaderLayout) {
  const std::vector<std::uint8_t> bytes = encode_model(build_cnn(28));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "RFFM");
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[6], 1);  // CNN
  EXPECT_EQ(bytes[7], 28);
  EXPECT_EQ(bytes[9], 14);  // tensor count
  EXPECT_EQ(bytes[11], 12);  // strlen("conv1/kernel")
  EXPECT_EQ(std::string(bytes.begin() + 12, bytes.begin() + 24), "conv1/kernel");
  EXPECT_EQ(bytes[24], 0);  // f32
  EXPECT_EQ(bytes[25], 4);  // rank
}

TEST(ModelFile, BadMagic) {
  std::vector<std::uint8_t> bytes = encode_model(build_cnn(3));
  bytes[1] = 'X';
  EXPECT_THROW(decode_model(bytes), FormatError);
}

TEST(ModelFile, ShapeMismatchNamesTensor) {
  std::vector<std::uint8_t> bytes = encode_model(build_cnn(3));
  bytes[26 + 12] = 9;  // conv1/kernel Cout 8 -> 9
  try {
    decode_model(bytes);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("conv1/kernel"), std::string::npos) << e.what();
  }
}

TEST(ModelFile, RejectsMinus128AndTrailingBytes) {
  std::vector<std::uint8_t> bytes = encode_model(quantize_model(build_cnn(3)));
  std::vector<std::uint8_t> longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode_model(longer), FormatError);
  // First int8 code of conv1/kernel: after the header, name, dtype, rank,
  // four dims and the scale.
  bytes[11 + 1 + 12 + 1 + 1 + 16 + 4] = 0x80;
  EXPECT_THROW(decode_model(bytes), FormatError);
}

TEST(ModelFile, Truncated) {
  const std::vector<std::uint8_t> bytes = encode_model(build_transformer(3));
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<long>(cut));
    EXPECT_THROW(decode_model(part), FormatError) << cut;
  }
}

}  // namespace
}  // namespace rff
