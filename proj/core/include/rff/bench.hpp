// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "rff/metrics.hpp"

namespace rff {

inline constexpr std::size_t kDefaultBenchRuns = 1000;
inline constexpr std::size_t kDefaultWarmupRuns = 10;

// Mean, sample std and 95% CI half-width of per-run timings in ms.
// Throws ParameterError for fewer than two timings.
LatencyStats latency_stats(std::span<const double> timings_ms);

// Times `runs` sequential single-sample predictions after `warmup` untimed
// ones. `input` must be one sample, [1, 256, 2, 1].
LatencyStats benchmark_latency(const Predictor& predict, const Tensor& input,
                               std::size_t runs = kDefaultBenchRuns,
                               std::size_t warmup = kDefaultWarmupRuns);

}  // namespace rff
