#pragma once

#include <cstddef>
#include <vector>

namespace nirvis::detail {

// C[M,N] += A[M,K] * B[K,N], all row-major. The i-k-j ordering keeps the
// inner loop contiguous so the compiler vectorizes it.
template <typename T>
void gemm_acc(int M, int N, int K, const T* A, const T* B, T* C) {
  for (int i = 0; i < M; ++i) {
    const T* a = A + static_cast<std::size_t>(i) * K;
    T* c = C + static_cast<std::size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const T av = a[k];
      const T* b = B + static_cast<std::size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// out[N,M] = in[M,N] transposed.
template <typename T>
void transpose(int M, int N, const T* in, T* out) {
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < N; ++j) out[static_cast<std::size_t>(j) * M + i] = in[static_cast<std::size_t>(i) * N + j];
}

}  // namespace nirvis::detail
