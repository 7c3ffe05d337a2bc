// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/bench.hpp"

#include <chrono>
#include <cmath>
#include <vector>

#include "rff/errors.hpp"
#include "rff/model.hpp"

namespace rff {

LatencyStats latency_stats(std::span<const double> timings_ms) {
  const std::size_t n = timings_ms.size();
  if (n < 2) throw ParameterError("latency statistics need at least two runs");
  double sum = 0.0;
  for (double t : timings_ms) sum += t;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double t : timings_ms) ss += (t - mean) * (t - mean);
  const double std_dev = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, std_dev, 1.96 * std_dev / std::sqrt(static_cast<double>(n)), n};
}

LatencyStats benchmark_latency(const Predictor& predict, const Tensor& input, std::size_t runs,
                               std::size_t warmup) {
  if (runs < 2) throw ParameterError("runs must be at least 2");
  if (warmup < kDefaultWarmupRuns) throw ParameterError("at least 10 warm-up runs are required");
  if (input.rank() != 4 || input.dim(0) != 1) throw DimensionError("benchmark input must be one sample [1, 256, 2, 1]");

  for (std::size_t i = 0; i < warmup; ++i) (void)predict(input);
  std::vector<double> timings(runs);
  for (double& t : timings) {
    const auto start = std::chrono::steady_clock::now();
    const Tensor out = predict(input);
    const auto stop = std::chrono::steady_clock::now();
    if (out.size() == 0) throw StateError("predictor returned nothing");
    t = std::chrono::duration<double, std::milli>(stop - start).count();
  }
  return latency_stats(timings);
}

}  // namespace rff
