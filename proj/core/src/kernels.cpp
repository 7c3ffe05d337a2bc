// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "rff/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

namespace rff::kernels {
namespace {

constexpr std::size_t kRowTile = 4;
constexpr std::size_t kColTile = 64;

#if defined(__AVX512F__)

// R x (16 V) block of C; the last vector is masked to the valid columns.
// Every output element accumulates in increasing k order with fused
// multiply-adds.
template <int R, int V>
void gemm_block(std::size_t k, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                float* c, std::size_t ldc, bool accumulate, __mmask16 tail) {
  __m512 acc[R][V];
  __mmask16 mask[V];
#pragma GCC unroll 4
  for (int v = 0; v < V; ++v) mask[v] = v == V - 1 ? tail : __mmask16(0xFFFF);
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) {
      acc[r][v] = accumulate ? _mm512_maskz_loadu_ps(mask[v], c + r * ldc + 16 * v) : _mm512_setzero_ps();
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb;
    __m512 bv[V];
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) bv[v] = _mm512_maskz_loadu_ps(mask[v], brow + 16 * v);
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      const __m512 av = _mm512_set1_ps(a[r * lda + p]);
#pragma GCC unroll 4
      for (int v = 0; v < V; ++v) acc[r][v] = _mm512_fmadd_ps(av, bv[v], acc[r][v]);
    }
  }
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) _mm512_mask_storeu_ps(c + r * ldc + 16 * v, mask[v], acc[r][v]);
  }
}

template <int R>
void gemm_rows(std::size_t n, std::size_t k, const float* a, std::size_t lda, const float* b,
               std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  for (std::size_t j = 0; j < n; j += kColTile) {
    const std::size_t cols = std::min(kColTile, n - j);
    const int vectors = static_cast<int>((cols + 15) / 16);
    const std::size_t last = cols - 16 * static_cast<std::size_t>(vectors - 1);
    const auto tail = static_cast<__mmask16>(last == 16 ? 0xFFFFu : (1u << last) - 1u);
    switch (vectors) {
      case 1: gemm_block<R, 1>(k, a, lda, b + j, ldb, c + j, ldc, accumulate, tail); break;
      case 2: gemm_block<R, 2>(k, a, lda, b + j, ldb, c + j, ldc, accumulate, tail); break;
      case 3: gemm_block<R, 3>(k, a, lda, b + j, ldb, c + j, ldc, accumulate, tail); break;
      default: gemm_block<R, 4>(k, a, lda, b + j, ldb, c + j, ldc, accumulate, tail); break;
    }
  }
}

#else

// Portable path with the same per-element summation order.
inline void gemm_rows_scalar(std::size_t rows, std::size_t n, std::size_t k, const float* a,
                             std::size_t lda, const float* b, std::size_t ldb, float* c,
                             std::size_t ldc, bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    float* crow = c + r * ldc;
    if (!accumulate) std::fill(crow, crow + n, 0.0f);
    for (std::size_t p = 0; p < k; ++p) {
      const float av = a[r * lda + p];
      const float* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
    }
  }
}

#endif

}  // namespace

void gemm(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
          const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
#if defined(__AVX512F__)
  std::size_t i = 0;
  for (; i + kRowTile <= m; i += kRowTile) {
    gemm_rows<4>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate);
  }
  switch (m - i) {
    case 1: gemm_rows<1>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate); break;
    case 2: gemm_rows<2>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate); break;
    case 3: gemm_rows<3>(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc, accumulate); break;
    default: break;
  }
#else
  gemm_rows_scalar(m, n, k, a, lda, b, ldb, c, ldc, accumulate);
#endif
}

void transpose(std::size_t rows, std::size_t cols, const float* src, std::size_t ld_src,
               float* dst, std::size_t ld_dst) {
  constexpr std::size_t kBlock = 16;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
    const std::size_t i1 = std::min(rows, i0 + kBlock);
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t j1 = std::min(cols, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) dst[j * ld_dst + i] = src[i * ld_src + j];
      }
    }
  }
}

#if defined(__AVX512BW__)
namespace {

inline __m512i madd_accumulate(__m512i acc, __m512i a, __m512i b) {
#if defined(__AVX512VNNI__)
  return _mm512_dpwssd_epi32(acc, a, b);
#else
  return _mm512_add_epi32(acc, _mm512_madd_epi16(a, b));
#endif
}

template <int R, int V>
void s16_block(std::size_t pairs, std::size_t ns, const std::int16_t* a, std::size_t lda,
               const std::int16_t* b, std::int32_t* c, std::size_t ldc, __mmask16 tail) {
  __m512i acc[R][V];
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) acc[r][v] = _mm512_setzero_si512();
  }
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::int16_t* brow = b + p * ns * 2;
    __m512i bv[V];
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) bv[v] = _mm512_loadu_si512(brow + 32 * v);
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r) {
      std::int32_t pair_bits;
      std::memcpy(&pair_bits, a + r * lda + 2 * p, sizeof pair_bits);
      const __m512i av = _mm512_set1_epi32(pair_bits);
#pragma GCC unroll 4
      for (int v = 0; v < V; ++v) acc[r][v] = madd_accumulate(acc[r][v], av, bv[v]);
    }
  }
#pragma GCC unroll 4
  for (int r = 0; r < R; ++r) {
#pragma GCC unroll 4
    for (int v = 0; v < V; ++v) {
      _mm512_mask_storeu_epi32(c + r * ldc + 16 * v, v == V - 1 ? tail : __mmask16(0xFFFF), acc[r][v]);
    }
  }
}

template <int R>
void s16_rows(std::size_t pairs, std::size_t n, std::size_t ns, const std::int16_t* a, std::size_t lda,
              const std::int16_t* b, std::int32_t* c, std::size_t ldc) {
  for (std::size_t j = 0; j < n; j += kColTile) {
    const std::size_t cols = std::min(kColTile, n - j);
    const int vectors = static_cast<int>((cols + 15) / 16);
    const std::size_t last = cols - 16 * static_cast<std::size_t>(vectors - 1);
    const auto tail = static_cast<__mmask16>(last == 16 ? 0xFFFFu : (1u << last) - 1u);
    const std::int16_t* bj = b + j * 2;
    switch (vectors) {
      case 1: s16_block<R, 1>(pairs, ns, a, lda, bj, c + j, ldc, tail); break;
      case 2: s16_block<R, 2>(pairs, ns, a, lda, bj, c + j, ldc, tail); break;
      case 3: s16_block<R, 3>(pairs, ns, a, lda, bj, c + j, ldc, tail); break;
      default: s16_block<R, 4>(pairs, ns, a, lda, bj, c + j, ldc, tail); break;
    }
  }
}

}  // namespace
#endif

float max_abs(const float* x, std::size_t n) {
  std::size_t i = 0;
  float m = 0.0f;
#if defined(__AVX512F__)
  __m512 acc = _mm512_setzero_ps();
  for (; i + 16 <= n; i += 16) acc = _mm512_max_ps(acc, _mm512_abs_ps(_mm512_loadu_ps(x + i)));
  m = _mm512_reduce_max_ps(acc);
#endif
  for (; i < n; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

void quantize_s16(const float* x, std::size_t n, float scale, std::int16_t* out) {
  std::size_t i = 0;
#if defined(__AVX512F__)
  const __m512 vscale = _mm512_set1_ps(scale);
  const __m512 half = _mm512_set1_ps(0.5f);
  const __m512 one = _mm512_set1_ps(1.0f);
  const __m512 limit = _mm512_set1_ps(127.0f);
  for (; i + 16 <= n; i += 16) {
    const __m512 v = _mm512_loadu_ps(x + i);
    const __m512 t = _mm512_div_ps(_mm512_abs_ps(v), vscale);
    __m512 r = _mm512_roundscale_ps(t, _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
    const __mmask16 up = _mm512_cmp_ps_mask(_mm512_sub_ps(t, r), half, _CMP_GE_OQ);
    r = _mm512_mask_add_ps(r, up, r, one);
    r = _mm512_min_ps(r, limit);
    const __mmask16 neg = _mm512_cmp_ps_mask(v, _mm512_setzero_ps(), _CMP_LT_OQ);
    r = _mm512_mask_sub_ps(r, neg, _mm512_setzero_ps(), r);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm512_cvtepi32_epi16(_mm512_cvttps_epi32(r)));
  }
#endif
  for (; i < n; ++i) {
    const float t = std::abs(x[i]) / scale;
    float r = std::trunc(t);
    if (t - r >= 0.5f) r += 1.0f;
    r = std::min(r, 127.0f);
    out[i] = static_cast<std::int16_t>(x[i] < 0.0f ? -r : r);
  }
}

PackedInt8Matrix::PackedInt8Matrix(std::size_t k, std::size_t n, const std::int8_t* b)
    : k_(k), n_(n), n_stride_((n + 15) / 16 * 16) {
  data_.assign(k_pairs() * n_stride_ * 2, 0);
  for (std::size_t p = 0; p < k; ++p) {
    const std::size_t pair = p / 2;
    const std::size_t lane = p % 2;
    for (std::size_t j = 0; j < n; ++j) {
      data_[(pair * n_stride_ + j) * 2 + lane] = b[p * n + j];
    }
  }
}

void gemm_s16(std::size_t m, const std::int16_t* a, std::size_t lda, const PackedInt8Matrix& b,
              std::int32_t* c, std::size_t ldc) {
  const std::size_t pairs = b.k_pairs();
  const std::size_t n = b.n();
  const std::size_t ns = b.n_stride();
  const std::int16_t* bp = b.data();
#if defined(__AVX512BW__)
  std::size_t i = 0;
  for (; i + kRowTile <= m; i += kRowTile) {
    s16_rows<4>(pairs, n, ns, a + i * lda, lda, bp, c + i * ldc, ldc);
  }
  switch (m - i) {
    case 1: s16_rows<1>(pairs, n, ns, a + i * lda, lda, bp, c + i * ldc, ldc); break;
    case 2: s16_rows<2>(pairs, n, ns, a + i * lda, lda, bp, c + i * ldc, ldc); break;
    case 3: s16_rows<3>(pairs, n, ns, a + i * lda, lda, bp, c + i * ldc, ldc); break;
    default: break;
  }
#elif defined(__AVX2__)
  for (std::size_t i = 0; i < m; ++i) {
    const std::int16_t* arow = a + i * lda;
    std::int32_t* crow = c + i * ldc;
    for (std::size_t j = 0; j < ns; j += 16) {
      __m256i acc0 = _mm256_setzero_si256();
      __m256i acc1 = _mm256_setzero_si256();
      for (std::size_t p = 0; p < pairs; ++p) {
        std::int32_t pair_bits;
        std::memcpy(&pair_bits, arow + 2 * p, sizeof pair_bits);
        const __m256i av = _mm256_set1_epi32(pair_bits);
        const std::int16_t* brow = bp + (p * ns + j) * 2;
        acc0 = _mm256_add_epi32(
            acc0, _mm256_madd_epi16(av, _mm256_loadu_si256(reinterpret_cast<const __m256i*>(brow))));
        acc1 = _mm256_add_epi32(acc1, _mm256_madd_epi16(av, _mm256_loadu_si256(
                                                               reinterpret_cast<const __m256i*>(brow + 16))));
      }
      alignas(32) std::int32_t out[16];
      _mm256_store_si256(reinterpret_cast<__m256i*>(out), acc0);
      _mm256_store_si256(reinterpret_cast<__m256i*>(out + 8), acc1);
      if (j < n) std::memcpy(crow + j, out, sizeof(std::int32_t) * std::min<std::size_t>(16, n - j));
    }
  }
#else
  for (std::size_t i = 0; i < m; ++i) {
    const std::int16_t* arow = a + i * lda;
    std::int32_t* crow = c + i * ldc;
    std::fill(crow, crow + n, 0);
    for (std::size_t p = 0; p < pairs; ++p) {
      const std::int32_t a0 = arow[2 * p];
      const std::int32_t a1 = arow[2 * p + 1];
      const std::int16_t* brow = bp + p * ns * 2;
      for (std::size_t j = 0; j < n; ++j) crow[j] += a0 * brow[2 * j] + a1 * brow[2 * j + 1];
    }
  }
#endif
}

namespace {

// Cody-Waite range reduction x = k ln2 + r, |r| <= ln2/2, then a degree-6
// polynomial for e^r and an exponent-field scale by 2^k.
constexpr float kLog2e = 1.44269504088896341f;
constexpr float kLn2Hi = 0.693359375f;
constexpr float kLn2Lo = -2.12194440e-4f;
constexpr float kExpLo = -87.0f;
constexpr float kExpHi = 88.0f;
constexpr float kPoly[7] = {1.38888889e-3f, 8.33333333e-3f, 4.16666667e-2f, 1.66666667e-1f, 0.5f, 1.0f, 1.0f};

inline float exp_scalar(float v) {
  const bool underflow = v < kExpLo;
  v = std::min(std::max(v, kExpLo), kExpHi);
  const float kf = std::nearbyint(v * kLog2e);
  float r = std::fma(-kf, kLn2Hi, v);
  r = std::fma(-kf, kLn2Lo, r);
  float p = kPoly[0];
  for (int i = 1; i < 7; ++i) p = std::fma(p, r, kPoly[i]);
  const auto bits = static_cast<std::int32_t>(kf) + 127;
  const float scale = std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 23);
  return underflow ? 0.0f : p * scale;
}

#if defined(__AVX512F__)
inline __m512 exp_vector(__m512 v) {
  const __mmask16 underflow = _mm512_cmp_ps_mask(v, _mm512_set1_ps(kExpLo), _CMP_LT_OQ);
  v = _mm512_min_ps(_mm512_max_ps(v, _mm512_set1_ps(kExpLo)), _mm512_set1_ps(kExpHi));
  const __m512 kf = _mm512_roundscale_ps(_mm512_mul_ps(v, _mm512_set1_ps(kLog2e)),
                                         _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m512 r = _mm512_fnmadd_ps(kf, _mm512_set1_ps(kLn2Hi), v);
  r = _mm512_fnmadd_ps(kf, _mm512_set1_ps(kLn2Lo), r);
  __m512 p = _mm512_set1_ps(kPoly[0]);
  for (int i = 1; i < 7; ++i) p = _mm512_fmadd_ps(p, r, _mm512_set1_ps(kPoly[i]));
  const __m512i bits = _mm512_slli_epi32(_mm512_add_epi32(_mm512_cvtps_epi32(kf), _mm512_set1_epi32(127)), 23);
  return _mm512_maskz_mul_ps(static_cast<__mmask16>(~underflow), p, _mm512_castsi512_ps(bits));
}
#endif

}  // namespace

void exp_inplace(float* x, std::size_t n) {
  std::size_t i = 0;
#if defined(__AVX512F__)
  for (; i + 16 <= n; i += 16) _mm512_storeu_ps(x + i, exp_vector(_mm512_loadu_ps(x + i)));
  if (i < n) {
    const auto tail = static_cast<__mmask16>((1u << (n - i)) - 1u);
    _mm512_mask_storeu_ps(x + i, tail, exp_vector(_mm512_maskz_loadu_ps(tail, x + i)));
    return;
  }
#endif
  for (; i < n; ++i) x[i] = exp_scalar(x[i]);
}

void softmax_row(float* x, std::size_t n) {
  if (n == 0) return;
#if defined(__AVX512F__)
  const std::size_t full = n - n % 16;
  const auto tail = static_cast<__mmask16>((1u << (n - full)) - 1u);
  const __m512 lowest = _mm512_set1_ps(-std::numeric_limits<float>::infinity());
  __m512 vmax = lowest;
  for (std::size_t i = 0; i < full; i += 16) vmax = _mm512_max_ps(vmax, _mm512_loadu_ps(x + i));
  if (tail) vmax = _mm512_max_ps(vmax, _mm512_mask_loadu_ps(lowest, tail, x + full));
  const __m512 peak = _mm512_set1_ps(_mm512_reduce_max_ps(vmax));
  __m512 vsum = _mm512_setzero_ps();
  for (std::size_t i = 0; i < full; i += 16) {
    const __m512 e = exp_vector(_mm512_sub_ps(_mm512_loadu_ps(x + i), peak));
    _mm512_storeu_ps(x + i, e);
    vsum = _mm512_add_ps(vsum, e);
  }
  if (tail) {
    const __m512 e = _mm512_maskz_mov_ps(tail, exp_vector(_mm512_sub_ps(_mm512_maskz_loadu_ps(tail, x + full), peak)));
    _mm512_mask_storeu_ps(x + full, tail, e);
    vsum = _mm512_add_ps(vsum, e);
  }
  const __m512 inv = _mm512_set1_ps(1.0f / _mm512_reduce_add_ps(vsum));
  for (std::size_t i = 0; i < full; i += 16) _mm512_storeu_ps(x + i, _mm512_mul_ps(_mm512_loadu_ps(x + i), inv));
  if (tail) _mm512_mask_storeu_ps(x + full, tail, _mm512_mul_ps(_mm512_maskz_loadu_ps(tail, x + full), inv));
#else
  float peak = x[0];
  for (std::size_t j = 1; j < n; ++j) peak = std::max(peak, x[j]);
  float sum = 0.0f;
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = exp_scalar(x[j] - peak);
    sum += x[j];
  }
  const float inv = 1.0f / sum;
  for (std::size_t j = 0; j < n; ++j) x[j] *= inv;
#endif
}

}  // namespace rff::kernels
