#pragma once

#include <cstddef>

// Accumulating matrix kernels on raw row-major buffers. Loop orders keep the
// innermost stride unit so the compiler can vectorize.
namespace slnl::detail {

// C (M,N) += A (M,K) * B (K,N)
inline void mm_nn_acc(double* C, const double* A, const double* B, std::size_t M,
                      std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    double* crow = C + m * N;
    const double* arow = A + m * K;
    for (std::size_t k = 0; k < K; ++k) {
      const double a = arow[k];
      const double* brow = B + k * N;
      for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

// C (M,N) += A (M,K) * B(N,K)^T
inline void mm_nt_acc(double* C, const double* A, const double* B, std::size_t M,
                      std::size_t K, std::size_t N) {
  for (std::size_t m = 0; m < M; ++m) {
    double* crow = C + m * N;
    const double* arow = A + m * K;
    for (std::size_t n = 0; n < N; ++n) {
      const double* brow = B + n * K;
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
      crow[n] += acc;
    }
  }
}

// C (M,N) += A (K,M)^T * B (K,N)
inline void mm_tn_acc(double* C, const double* A, const double* B, std::size_t M,
                      std::size_t K, std::size_t N) {
  for (std::size_t k = 0; k < K; ++k) {
    const double* arow = A + k * M;
    const double* brow = B + k * N;
    for (std::size_t m = 0; m < M; ++m) {
      const double a = arow[m];
      double* crow = C + m * N;
      for (std::size_t n = 0; n < N; ++n) crow[n] += a * brow[n];
    }
  }
}

}  // namespace slnl::detail
