// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "rff/errors.hpp"

namespace rff {
namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

std::size_t argmax_row(const float* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0f) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie strictly between 0 and 1");
  }
}

LossAccuracy evaluate_loss_accuracy(const ModelGraph& model, const Dataset& data) {
  if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
  const Tensor probs = model.forward(data.to_tensor(), Mode::kInfer);
  const std::vector<std::size_t> labels = data.labels();
  const std::size_t c = model.num_classes();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax_row(probs.data() + i * c, c) == labels[i]) ++correct;
  }
  const std::vector<Param*> reg = model.l2_params();
  const double loss = static_cast<double>(sparse_cce_loss(probs, labels)) +
                      static_cast<double>(l2_penalty(reg, model.l2_factor(), false));
  return {loss, static_cast<double>(correct) / static_cast<double>(labels.size())};
}

TrainResult train(const ModelGraph& model, const Dataset& dataset, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.num_classes() != model.num_classes()) {
    throw ConfigError("dataset has " + std::to_string(dataset.num_classes()) + " classes but model expects " +
                      std::to_string(model.num_classes()));
  }
  auto [train_set, val_set] = split(dataset, 1.0 - config.validation_fraction, config.seed);
  if (train_set.empty() || val_set.empty()) throw ConfigError("dataset too small for the validation split");
  return train(model, train_set, val_set, config, on_epoch);
}

TrainResult train(const ModelGraph& model, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.num_classes() != model.num_classes() || val_set.num_classes() != model.num_classes()) {
    throw ConfigError("dataset class count does not match the model");
  }
  if (train_set.empty() || val_set.empty()) throw ConfigError("train and validation sets must be non-empty");

  TrainResult result{model, {}};
  ModelGraph& net = result.model;
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  AdamState optimizer(net.params(), adam);
  const Rng root(config.seed);
  Rng dropout_rng = root.fork(kDropoutStream);
  const BatchIterator batches(train_set, config.batch_size, config.shuffle_each_epoch,
                              root.fork(kShuffleStream).next_u64());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::size_t> order = batches.epoch_order(epoch);
    for (std::size_t b = 0; b < batches.batches_per_epoch(); ++b) {
      const Batch batch = batches.make_batch(order, b);
      net.zero_grad();
      const float loss = net.accumulate_gradients(batch.inputs, batch.labels, dropout_rng);
      if (!std::isfinite(loss)) {
        throw StateError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      adam_update(optimizer, net.params());
    }
    const LossAccuracy tr = evaluate_loss_accuracy(net, train_set);
    const LossAccuracy va = evaluate_loss_accuracy(net, val_set);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    EpochRecord rec{epoch + 1, tr.loss, tr.accuracy, va.loss, va.accuracy, elapsed.count()};
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n";
  char line[256];
  for (const EpochRecord& r : history.epochs) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g,%.3f\n", r.epoch, r.train_loss,
                  r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds);
    out += line;
  }
  return out;
}

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << history_csv(history);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<SweepRow> batch_size_sweep(const ModelBuilder& builder, const Dataset& dataset,
                                       const std::vector<std::size_t>& sizes, std::size_t epochs,
                                       const TrainConfig& base) {
  if (sizes.empty()) throw ConfigError("batch-size sweep needs at least one size");
  std::vector<SweepRow> rows;
  for (std::size_t size : sizes) {
    TrainConfig cfg = base;
    cfg.batch_size = size;
    cfg.epochs = epochs;
    const TrainResult run = train(builder(), dataset, cfg);
    SweepRow row{size, 0.0, run.history.back().val_accuracy, {}};
    for (const EpochRecord& r : run.history.epochs) {
      row.total_seconds += r.seconds;
      row.val_accuracy.push_back(r.val_accuracy);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace rff
