// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rff/errors.hpp"

namespace rff {
namespace {

void check_scores(const Tensor& scores, std::span<const std::size_t> labels) {
  if (scores.rank() != 2) throw DimensionError("scores must be [N, C]");
  if (scores.dim(0) != labels.size()) throw DimensionError("one label per score row required");
  if (labels.empty()) throw InputError("need at least one sample");
  for (std::size_t y : labels) {
    if (y >= scores.dim(1)) throw InputError("label " + std::to_string(y) + " out of range");
  }
}

// Mann-Whitney U / (P * N) with mid-ranks for tied scores.
double auc_for_class(const Tensor& scores, std::span<const std::size_t> labels, std::size_t c) {
  const std::size_t n = labels.size();
  const std::size_t cols = scores.dim(1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a * cols + c] < scores[b * cols + c];
  });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j] * cols + c] == scores[order[i] * cols + c]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == c) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

}  // namespace

bool AucResult::defined(std::size_t c) const { return c < per_class.size() && !std::isnan(per_class[c]); }

Predictor make_predictor(const ModelGraph& model) {
  return [&model](const Tensor& batch) { return model.forward(batch, Mode::kInfer); };
}

Predictor make_predictor(const QuantizedModel& model) {
  return [&model](const Tensor& batch) { return model.forward(batch); };
}

Predictor make_predictor(const AnyModel& model) {
  return [&model](const Tensor& batch) { return predict(model, batch); };
}

Tensor predict_dataset(const Predictor& predict, const Dataset& data, std::size_t chunk) {
  if (data.empty()) throw InputError("cannot predict on an empty dataset");
  if (chunk == 0) throw ParameterError("chunk must be positive");
  std::vector<float> out;
  std::size_t classes = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(data.size(), begin + chunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor probs = predict(data.to_tensor(idx));
    if (probs.rank() != 2 || probs.dim(0) != idx.size()) throw DimensionError("predictor returned wrong shape");
    classes = probs.dim(1);
    out.insert(out.end(), probs.values().begin(), probs.values().end());
  }
  return Tensor({data.size(), classes}, std::move(out));
}

std::vector<std::size_t> argmax_rows(const Tensor& scores) {
  if (scores.rank() != 2) throw DimensionError("scores must be [N, C]");
  const std::size_t cols = scores.dim(1);
  std::vector<std::size_t> out(scores.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const float* row = scores.data() + i * cols;
    std::size_t best = 0;
    for (std::size_t j = 1; j < cols; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = best;
  }
  return out;
}

AucResult roc_auc_ovr(const Tensor& scores, std::span<const std::size_t> labels) {
  check_scores(scores, labels);
  AucResult result;
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < scores.dim(1); ++c) {
    const double auc = auc_for_class(scores, labels, c);
    result.per_class.push_back(auc);
    if (!std::isnan(auc)) {
      sum += auc;
      ++defined;
    }
  }
  result.macro = defined ? sum / static_cast<double>(defined) : std::numeric_limits<double>::quiet_NaN();
  return result;
}

MetricsReport metrics_from_scores(const Tensor& scores, std::span<const std::size_t> labels) {
  check_scores(scores, labels);
  const std::size_t classes = scores.dim(1);
  MetricsReport report;
  report.confusion.assign(classes, std::vector<std::uint64_t>(classes, 0));
  const std::vector<std::size_t> predicted = argmax_rows(scores);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++report.confusion[labels[i]][predicted[i]];
    if (predicted[i] == labels[i]) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  AucResult auc = roc_auc_ovr(scores, labels);
  report.auc_per_class = std::move(auc.per_class);
  report.auc_macro = auc.macro;
  return report;
}

MetricsReport evaluate(const Predictor& predict, std::size_t model_classes, const Dataset& data) {
  if (model_classes != data.num_classes()) {
    throw ConfigError("model has " + std::to_string(model_classes) + " classes but dataset has " +
                      std::to_string(data.num_classes()));
  }
  const Tensor scores = predict_dataset(predict, data);
  const std::vector<std::size_t> labels = data.labels();
  return metrics_from_scores(scores, labels);
}

MetricsReport evaluate(const ModelGraph& model, const Dataset& data) {
  return evaluate(make_predictor(model), model.num_classes(), data);
}

MetricsReport evaluate(const QuantizedModel& model, const Dataset& data) {
  return evaluate(make_predictor(model), model.num_classes(), data);
}

MetricsReport evaluate(const AnyModel& model, const Dataset& data) {
  return evaluate(make_predictor(model), num_classes_of(model), data);
}

Dataset permute_timesteps(const Dataset& data, std::span<const std::size_t> order) {
  if (order.size() != kRecordSamples) throw DimensionError("permutation must have 256 entries");
  std::vector<bool> seen(kRecordSamples, false);
  for (std::size_t o : order) {
    if (o >= kRecordSamples || seen[o]) throw InputError("not a permutation of 0..255");
    seen[o] = true;
  }
  std::vector<SignalRecord> out = data.records();
  for (SignalRecord& r : out) {
    const SignalRecord src = r;
    for (std::size_t i = 0; i < kRecordSamples; ++i) r.iq[i] = src.iq[order[i]];
  }
  return Dataset(data.class_names(), std::move(out), data.provenance(), data.seed());
}

Dataset permute_timesteps(const Dataset& data, std::uint64_t seed, bool shared) {
  const Rng root(seed);
  if (shared) {
    Rng rng = root.fork(0);
    return permute_timesteps(data, rng_permutation(rng, kRecordSamples));
  }
  std::vector<SignalRecord> out = data.records();
  for (std::size_t n = 0; n < out.size(); ++n) {
    Rng rng = root.fork(n);
    const std::vector<std::size_t> order = rng_permutation(rng, kRecordSamples);
    const SignalRecord src = out[n];
    for (std::size_t i = 0; i < kRecordSamples; ++i) out[n].iq[i] = src.iq[order[i]];
  }
  return Dataset(data.class_names(), std::move(out), data.provenance(), data.seed());
}

}  // namespace rff
