// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

// Raw row-major GEMM kernels shared by the float and int8 inference paths.
// Leading dimensions follow the BLAS convention so callers can address
// column slices (e.g. one attention head inside a packed projection).
namespace rff::kernels {

// C[m,n] (+)= A[m,k] * B[k,n]. For every output element the k-sum runs in
// increasing k order starting from either 0 or the existing C value.
void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);

// dst[cols, rows] = src[rows, cols]^T
void transpose(std::size_t rows, std::size_t cols, const float* src, std::size_t ld_src,
               float* dst, std::size_t ld_dst);

// Int8 weights repacked as interleaved int16 pairs along k, the layout the
// multiply-add-pairs instructions consume:
//   data[(p * n_stride + j) * 2 + r] = B[2p + r, j]
// Rows past k and columns past n are zero.
class PackedInt8Matrix {
 public:
  PackedInt8Matrix() = default;
  PackedInt8Matrix(std::size_t k, std::size_t n, const std::int8_t* b);

  std::size_t k() const noexcept { return k_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k_pairs() const noexcept { return (k_ + 1) / 2; }
  std::size_t n_stride() const noexcept { return n_stride_; }
  const std::int16_t* data() const noexcept { return data_.data(); }

 private:
  std::size_t k_ = 0;
  std::size_t n_ = 0;
  std::size_t n_stride_ = 0;
  std::vector<std::int16_t> data_;
};

// C[m,n] = A[m,k] * B[k,n], exact in int32. A holds int8 codes widened to
// int16 with row stride lda >= 2 * k_pairs; an odd k needs one zero pad column.
void gemm_s16(std::size_t m, const std::int16_t* a, std::size_t lda, const PackedInt8Matrix& b,
              std::int32_t* c, std::size_t ldc);

// max |x[i]| over n values (0 for n == 0).
float max_abs(const float* x, std::size_t n);

// out[i] = round-half-away-from-zero(x[i] / scale) clamped to [-127, 127].
void quantize_s16(const float* x, std::size_t n, float scale, std::int16_t* out);

// Vectorizable exp for softmax; relative error below 2e-7 on [-87, 88],
// returns 0 below that range.
void exp_inplace(float* x, std::size_t n);

// Max-stabilised softmax of one row, in place.
void softmax_row(float* x, std::size_t n);

}  // namespace rff::kernels
