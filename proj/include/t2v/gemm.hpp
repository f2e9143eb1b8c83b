#pragma once

#include <cstddef>

namespace t2v {

// Accumulating matrix kernels, row-major, single-threaded. The i,k,j loop
// order keeps the inner loop streaming over contiguous B and C rows, which
// the compiler vectorizes; blocking keeps the working set in L1/L2.
// All three accumulate into C (callers zero C when they want a plain product).

inline constexpr size_t kGemmBlockI = 64;
inline constexpr size_t kGemmBlockK = 128;
inline constexpr size_t kGemmBlockJ = 256;

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(size_t M, size_t K, size_t N, const T* A, const T* B, T* C) {
    for (size_t i0 = 0; i0 < M; i0 += kGemmBlockI) {
        size_t i1 = i0 + kGemmBlockI < M ? i0 + kGemmBlockI : M;
        for (size_t k0 = 0; k0 < K; k0 += kGemmBlockK) {
            size_t k1 = k0 + kGemmBlockK < K ? k0 + kGemmBlockK : K;
            for (size_t j0 = 0; j0 < N; j0 += kGemmBlockJ) {
                size_t j1 = j0 + kGemmBlockJ < N ? j0 + kGemmBlockJ : N;
                for (size_t i = i0; i < i1; ++i) {
                    T* c = C + i * N;
                    const T* a = A + i * K;
                    for (size_t k = k0; k < k1; ++k) {
                        T av = a[k];
                        const T* b = B + k * N;
                        for (size_t j = j0; j < j1; ++j) c[j] += av * b[j];
                    }
                }
            }
        }
    }
}

// C[M,N] += A^T[M,K] * B[K,N] where A is stored [K,M]
template <typename T>
void gemm_tn(size_t M, size_t K, size_t N, const T* A, const T* B, T* C) {
    for (size_t i0 = 0; i0 < M; i0 += kGemmBlockI) {
        size_t i1 = i0 + kGemmBlockI < M ? i0 + kGemmBlockI : M;
        for (size_t k0 = 0; k0 < K; k0 += kGemmBlockK) {
            size_t k1 = k0 + kGemmBlockK < K ? k0 + kGemmBlockK : K;
            for (size_t j0 = 0; j0 < N; j0 += kGemmBlockJ) {
                size_t j1 = j0 + kGemmBlockJ < N ? j0 + kGemmBlockJ : N;
                for (size_t i = i0; i < i1; ++i) {
                    T* c = C + i * N;
                    for (size_t k = k0; k < k1; ++k) {
                        T av = A[k * M + i];
                        const T* b = B + k * N;
                        for (size_t j = j0; j < j1; ++j) c[j] += av * b[j];
                    }
                }
            }
        }
    }
}

// C[M,N] += A[M,K] * B^T[K,N] where B is stored [N,K]; dot-product form
// since both rows are contiguous.
template <typename T>
void gemm_nt(size_t M, size_t K, size_t N, const T* A, const T* B, T* C) {
    for (size_t i0 = 0; i0 < M; i0 += kGemmBlockI) {
        size_t i1 = i0 + kGemmBlockI < M ? i0 + kGemmBlockI : M;
        for (size_t j0 = 0; j0 < N; j0 += kGemmBlockJ) {
            size_t j1 = j0 + kGemmBlockJ < N ? j0 + kGemmBlockJ : N;
            for (size_t k0 = 0; k0 < K; k0 += kGemmBlockK) {
                size_t k1 = k0 + kGemmBlockK < K ? k0 + kGemmBlockK : K;
                for (size_t i = i0; i < i1; ++i) {
                    const T* a = A + i * K;
                    for (size_t j = j0; j < j1; ++j) {
                        const T* b = B + j * K;
                        T acc = T(0);
                        for (size_t k = k0; k < k1; ++k) acc += a[k] * b[k];
                        C[i * N + j] += acc;
                    }
                }
            }
        }
    }
}

}  // namespace t2v
