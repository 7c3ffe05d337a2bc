// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace rff::detail {

// grad[n] += column sums of dz[rows, n]
void accumulate_bias_grad(const float* dz, std::size_t rows, std::size_t n, float* grad);

// grad[k, n] += x[rows, k]^T dz[rows, n]
void accumulate_kernel_grad(const float* x, const float* dz, std::size_t rows, std::size_t k,
                            std::size_t n, float* grad);

// dx[rows, k] (+)= dz[rows, n] W[k, n]^T
void input_grad(const float* dz, const float* kernel, std::size_t rows, std::size_t k,
                std::size_t n, float* dx, bool accumulate = false);

}  // namespace rff::detail
