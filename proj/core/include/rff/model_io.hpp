// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "rff/model.hpp"
#include "rff/quantize.hpp"

namespace rff {

enum class TensorDtype : std::uint8_t { kFloat32 = 0, kInt8 = 1 };

// A model file holds either a float graph or its quantized form.
using AnyModel = std::variant<ModelGraph, QuantizedModel>;

std::vector<std::uint8_t> encode_model(const ModelGraph& model);
std::vector<std::uint8_t> encode_model(const QuantizedModel& model);
// Throws FormatError (with the offending tensor name where one applies).
AnyModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelGraph& model, const std::filesystem::path& path);
void save_model(const QuantizedModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

// Throws ConfigError when the file holds the other kind of model.
ModelGraph load_float_model(const std::filesystem::path& path);
QuantizedModel load_quantized_model(const std::filesystem::path& path);

bool is_quantized(const AnyModel& model) noexcept;
Architecture architecture_of(const AnyModel& model) noexcept;
std::size_t num_classes_of(const AnyModel& model) noexcept;
// Probabilities from whichever path the model uses.
Tensor predict(const AnyModel& model, const Tensor& batch);

}  // namespace rff
