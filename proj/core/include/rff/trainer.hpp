// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rff/dataset.hpp"
#include "rff/model.hpp"
#include "rff/optimizer.hpp"

namespace rff {

struct TrainConfig {
  float learning_rate = 1e-3f;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  bool shuffle_each_epoch = true;
  double validation_fraction = 0.2;
  std::uint64_t seed = 42;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;  // wall time of the update pass and both metric passes
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  std::size_t size() const noexcept { return epochs.size(); }
  const EpochRecord& back() const { return epochs.back(); }
};

struct TrainResult {
  ModelGraph model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Loss (mean cross-entropy plus the model's L2 penalty) and top-1 accuracy of
// an infer-mode pass.
struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};
LossAccuracy evaluate_loss_accuracy(const ModelGraph& model, const Dataset& data);

// Splits `dataset` with config.seed and config.validation_fraction, then
// trains on the first part and reports metrics on the second.
TrainResult train(const ModelGraph& model, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

// Trains on `train_set`, reporting validation metrics on `val_set`.
TrainResult train(const ModelGraph& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

std::string history_csv(const TrainHistory& history);
void save_history_csv(const TrainHistory& history, const std::filesystem::path& path);

struct SweepRow {
  std::size_t batch_size = 0;
  double total_seconds = 0.0;
  double final_val_accuracy = 0.0;
  std::vector<double> val_accuracy;  // per epoch
};

using ModelBuilder = std::function<ModelGraph()>;

// One fresh model per batch size, trained one after another so wall times
// are comparable.
std::vector<SweepRow> batch_size_sweep(const ModelBuilder& builder, const Dataset& dataset,
                                       const std::vector<std::size_t>& sizes, std::size_t epochs,
                                       const TrainConfig& base = {});

}  // namespace rff
