// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>

// Row-major GEMM kernels. Every output element accumulates its products in
// ascending k order regardless of the matrix extents, so a row's result does
// not depend on how many other rows share the call (batch-size invariance in
// eval mode relies on this).
namespace ncsl::diff::kernels {

inline constexpr std::int64_t kColumnBlock = 512;

// C[M,N] += A[M,K] * B[K,N]
template <class T>
void gemm_nn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, std::int64_t lda,
             const T* B, std::int64_t ldb, T* C, std::int64_t ldc) {
  for (std::int64_t j0 = 0; j0 < N; j0 += kColumnBlock) {
    const std::int64_t jn = std::min(N, j0 + kColumnBlock) - j0;
    for (std::int64_t i = 0; i < M; ++i) {
      T* __restrict c = C + i * ldc + j0;
      const T* a_row = A + i * lda;
      for (std::int64_t k = 0; k < K; ++k) {
        const T a = a_row[k];
        if (a == T{0}) continue;
        const T* __restrict b = B + k * ldb + j0;
        for (std::int64_t j = 0; j < jn; ++j) c[j] += a * b[j];
      }
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
template <class T>
void gemm_tn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, std::int64_t lda,
             const T* B, std::int64_t ldb, T* C, std::int64_t ldc) {
  for (std::int64_t j0 = 0; j0 < N; j0 += kColumnBlock) {
    const std::int64_t jn = std::min(N, j0 + kColumnBlock) - j0;
    for (std::int64_t k = 0; k < K; ++k) {
      const T* a_row = A + k * lda;
      const T* __restrict b = B + k * ldb + j0;
      for (std::int64_t i = 0; i < M; ++i) {
        const T a = a_row[i];
        if (a == T{0}) continue;
        T* __restrict c = C + i * ldc + j0;
        for (std::int64_t j = 0; j < jn; ++j) c[j] += a * b[j];
      }
    }
  }
}

// out[cols, rows] = in[rows, cols]^T
template <class T>
void transpose(std::int64_t rows, std::int64_t cols, const T* in, T* out) {
  constexpr std::int64_t kTile = 32;
  for (std::int64_t r0 = 0; r0 < rows; r0 += kTile)
    for (std::int64_t c0 = 0; c0 < cols; c0 += kTile)
      for (std::int64_t r = r0; r < std::min(rows, r0 + kTile); ++r)
        for (std::int64_t c = c0; c < std::min(cols, c0 + kTile); ++c) out[c * rows + r] = in[r * cols + c];
}

// Unfolds one CHW image into a [C*K*K, Ho*Wo] patch matrix.
template <class T>
void im2col(const T* img, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t K,
            std::int64_t stride, std::int64_t pad, std::int64_t Ho, std::int64_t Wo, T* cols) {
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t ky = 0; ky < K; ++ky)
      for (std::int64_t kx = 0; kx < K; ++kx) {
        T* dst = cols + ((c * K + ky) * K + kx) * Ho * Wo;
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
          const std::int64_t iy = oy * stride - pad + ky;
          for (std::int64_t ox = 0; ox < Wo; ++ox) {
            const std::int64_t ix = ox * stride - pad + kx;
            dst[oy * Wo + ox] =
                (iy >= 0 && iy < H && ix >= 0 && ix < W) ? img[(c * H + iy) * W + ix] : T{0};
          }
        }
      }
}

// Adjoint of im2col: scatters patch gradients back into a CHW image buffer.
template <class T>
void col2im_add(const T* cols, std::int64_t C, std::int64_t H, std::int64_t W, std::int64_t K,
                std::int64_t stride, std::int64_t pad, std::int64_t Ho, std::int64_t Wo, T* img) {
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t ky = 0; ky < K; ++ky)
      for (std::int64_t kx = 0; kx < K; ++kx) {
        const T* src = cols + ((c * K + ky) * K + kx) * Ho * Wo;
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
          const std::int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (std::int64_t ox = 0; ox < Wo; ++ox) {
            const std::int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            img[(c * H + iy) * W + ix] += src[oy * Wo + ox];
          }
        }
      }
}

}  // namespace ncsl::diff::kernels
