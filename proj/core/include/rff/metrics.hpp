// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rff/dataset.hpp"
#include "rff/model_io.hpp"
#include "rff/tensor.hpp"

namespace rff {

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;   // sample standard deviation
  double ci95_ms = 0.0;  // half-width, 1.96 * std / sqrt(runs)
  std::size_t runs = 0;
  bool operator==(const LatencyStats&) const = default;
};

struct AucResult {
  // NaN where a class has no positives or no negatives.
  std::vector<double> per_class;
  // Mean over the defined classes; NaN if none is defined.
  double macro = 0.0;

  bool defined(std::size_t c) const;
};

struct MetricsReport {
  double accuracy = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
  std::vector<double> auc_per_class;
  double auc_macro = 0.0;
  std::optional<LatencyStats> latency;
};

// Maps a [B, 256, 2, 1] batch to class probabilities [B, C].
using Predictor = std::function<Tensor(const Tensor&)>;

// The predictor borrows the model, which must outlive it.
Predictor make_predictor(const ModelGraph& model);
Predictor make_predictor(const QuantizedModel& model);
Predictor make_predictor(const AnyModel& model);
Predictor make_predictor(ModelGraph&&) = delete;
Predictor make_predictor(QuantizedModel&&) = delete;
Predictor make_predictor(AnyModel&&) = delete;

// Probabilities for every record, evaluated in chunks.
Tensor predict_dataset(const Predictor& predict, const Dataset& data, std::size_t chunk = 256);

// Index of the largest entry in each row; ties go to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& scores);

// One-vs-rest AUC per class via rank sums (ties count one half).
AucResult roc_auc_ovr(const Tensor& scores, std::span<const std::size_t> labels);

MetricsReport metrics_from_scores(const Tensor& scores, std::span<const std::size_t> labels);

// Throws ConfigError when class counts differ.
MetricsReport evaluate(const Predictor& predict, std::size_t model_classes, const Dataset& data);
MetricsReport evaluate(const ModelGraph& model, const Dataset& data);
MetricsReport evaluate(const QuantizedModel& model, const Dataset& data);
MetricsReport evaluate(const AnyModel& model, const Dataset& data);

// Each record's 256 IQ rows reordered by an independent permutation drawn
// from a per-record stream of `seed`; with `shared`, one permutation for all.
Dataset permute_timesteps(const Dataset& data, std::uint64_t seed, bool shared = false);
// Applies an explicit permutation (order[i] = source row of output row i).
Dataset permute_timesteps(const Dataset& data, std::span<const std::size_t> order);

}  // namespace rff
