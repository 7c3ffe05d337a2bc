// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/model_io.hpp"

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "rff/errors.hpp"

namespace rff {
namespace {

constexpr char kMagic[4] = {'R', 'F', 'F', 'M'};
constexpr std::uint16_t kVersion = 1;

void write_header(detail::ByteWriter& w, const ModelGraph& graph) {
  w.put_raw(kMagic, 4);
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(graph.architecture()));
  w.put(static_cast<std::uint16_t>(graph.num_classes()));
  w.put(static_cast<std::uint16_t>(graph.params().size()));
}

void write_tensor_head(detail::ByteWriter& w, const std::string& name, TensorDtype dtype, const Shape& shape) {
  w.put_short_string(name);
  w.put(static_cast<std::uint8_t>(dtype));
  w.put(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) w.put(static_cast<std::uint32_t>(d));
}

void write_float_tensor(detail::ByteWriter& w, const Param& p) {
  write_tensor_head(w, p.name, TensorDtype::kFloat32, p.value.shape());
  w.put_raw(p.value.data(), p.value.size() * sizeof(float));
}

[[noreturn]] void tensor_error(const std::string& name, const std::string& what, std::size_t offset) {
  throw FormatError("tensor '" + name + "': " + what, offset);
}

}  // namespace

std::vector<std::uint8_t> encode_model(const ModelGraph& model) {
  detail::ByteWriter w;
  write_header(w, model);
  for (const Param* p : model.params()) write_float_tensor(w, *p);
  return std::move(w.bytes());
}

std::vector<std::uint8_t> encode_model(const QuantizedModel& model) {
  detail::ByteWriter w;
  write_header(w, model.graph());
  std::size_t slot = 0;
  for (const Param* p : model.graph().params()) {
    if (!p->is_kernel) {
      write_float_tensor(w, *p);
      continue;
    }
    const QuantizedTensor& q = model.kernels()[slot++];
    write_tensor_head(w, p->name, TensorDtype::kInt8, q.shape);
    w.put(q.scale);
    w.put_raw(q.values.data(), q.values.size());
  }
  return std::move(w.bytes());
}

AnyModel decode_model(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes);
  char magic[4];
  r.get_raw(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("bad magic, expected RFFM", 0);
  const std::size_t version_at = r.offset();
  if (r.get<std::uint16_t>("version") != kVersion) throw FormatError("unsupported model version", version_at);
  const std::size_t arch_at = r.offset();
  const auto arch_id = r.get<std::uint8_t>("architecture id");
  if (arch_id != static_cast<std::uint8_t>(Architecture::kCnn) &&
      arch_id != static_cast<std::uint8_t>(Architecture::kTransformer)) {
    throw FormatError("unknown architecture id " + std::to_string(arch_id), arch_at);
  }
  const std::size_t classes_at = r.offset();
  const auto classes = r.get<std::uint16_t>("num_classes");
  if (classes < 2) throw FormatError("num_classes must be at least 2", classes_at);
  ModelGraph graph = ModelGraph::skeleton(static_cast<Architecture>(arch_id), classes);

  const std::size_t count_at = r.offset();
  const auto count = r.get<std::uint16_t>("tensor_count");
  if (count != graph.params().size()) {
    throw FormatError("tensor_count " + std::to_string(count) + " does not match architecture (" +
                          std::to_string(graph.params().size()) + ")",
                      count_at);
  }

  std::vector<QuantizedTensor> kernels;
  std::size_t float_kernels = 0;
  for (Param* p : graph.params()) {
    const std::size_t name_at = r.offset();
    const std::string name = r.get_short_string("tensor name");
    if (name != p->name) tensor_error(name, "expected tensor '" + p->name + "' at this position", name_at);
    const std::size_t dtype_at = r.offset();
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > 1) tensor_error(name, "unknown dtype " + std::to_string(dtype), dtype_at);
    if (dtype == 1 && !p->is_kernel) tensor_error(name, "only kernels may be int8", dtype_at);
    const std::size_t shape_at = r.offset();
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape(rank);
    for (std::size_t& d : shape) d = r.get<std::uint32_t>("dims");
    if (shape != p->value.shape()) {
      tensor_error(name, "shape " + shape_string(shape) + " disagrees with architecture " +
                             shape_string(p->value.shape()),
                   shape_at);
    }
    if (dtype == 0) {
      r.get_raw(p->value.data(), p->value.size() * sizeof(float), "tensor values");
      if (p->is_kernel) ++float_kernels;
    } else {
      QuantizedTensor q;
      q.shape = shape;
      const std::size_t scale_at = r.offset();
      q.scale = r.get<float>("scale");
      if (!(q.scale > 0.0f) || !std::isfinite(q.scale)) tensor_error(name, "scale must be positive", scale_at);
      q.values.resize(p->value.size());
      const std::size_t values_at = r.offset();
      r.get_raw(q.values.data(), q.values.size(), "tensor values");
      if (std::find(q.values.begin(), q.values.end(), std::int8_t{-128}) != q.values.end()) {
        tensor_error(name, "int8 code -128 is outside the symmetric range", values_at);
      }
      kernels.push_back(std::move(q));
    }
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.offset());
  if (kernels.empty()) return graph;
  if (float_kernels != 0) throw FormatError("quantized file mixes float and int8 kernels", count_at);
  return QuantizedModel(std::move(graph), std::move(kernels));
}

void save_model(const ModelGraph& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

void save_model(const QuantizedModel& model, const std::filesystem::path& path) {
  detail::write_file(path, encode_model(model));
}

AnyModel load_model(const std::filesystem::path& path) { return decode_model(detail::read_file(path)); }

ModelGraph load_float_model(const std::filesystem::path& path) {
  AnyModel m = load_model(path);
  if (auto* g = std::get_if<ModelGraph>(&m)) return std::move(*g);
  throw ConfigError("'" + path.string() + "' holds a quantized model; a float model is required");
}

QuantizedModel load_quantized_model(const std::filesystem::path& path) {
  AnyModel m = load_model(path);
  if (auto* q = std::get_if<QuantizedModel>(&m)) return std::move(*q);
  throw ConfigError("'" + path.string() + "' holds a float model; a quantized model is required");
}

bool is_quantized(const AnyModel& model) noexcept { return std::holds_alternative<QuantizedModel>(model); }

Architecture architecture_of(const AnyModel& model) noexcept {
  return std::visit([](const auto& m) { return m.architecture(); }, model);
}

std::size_t num_classes_of(const AnyModel& model) noexcept {
  return std::visit([](const auto& m) { return m.num_classes(); }, model);
}

Tensor predict(const AnyModel& model, const Tensor& batch) {
  if (const auto* g = std::get_if<ModelGraph>(&model)) return g->forward(batch, Mode::kInfer);
  return std::get<QuantizedModel>(model).forward(batch);
}

}  // namespace rff
