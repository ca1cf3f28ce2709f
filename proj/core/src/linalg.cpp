#include "ki/linalg.hpp"

#include <cblas.h>
#include <omp.h>

#include <algorithm>
#include <atomic>

// Present with OpenBLAS, absent with reference BLAS; probe at link time.
extern "C" void openblas_set_num_threads(int) __attribute__((weak));

namespace ki {

namespace {
std::atomic<int> g_threads{1};

struct BlasInit {
    BlasInit() {
        // All parallelism is managed here via row tiles; BLAS itself must
        // stay sequential or determinism across thread counts is lost.
        if (openblas_set_num_threads) openblas_set_num_threads(1);
    }
} g_blas_init;

template <typename T, typename F>
void for_each_tile(int m, F&& body) {
    const int tiles = (m + detail::kRowTile - 1) / detail::kRowTile;
    const int nthreads = std::min(g_threads.load(), tiles);
    if (nthreads <= 1) {
        for (int t = 0; t < tiles; ++t) body(t);
        return;
    }
#pragma omp parallel for schedule(static) num_threads(nthreads)
    for (int t = 0; t < tiles; ++t) body(t);
}

template <typename T>
void gemm_impl(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
               const T* b, int ldb, T beta, T* c, int ldc) {
    auto call = [&](int row0, int rows) {
        // row slice of op(A): without transpose rows are contiguous blocks of
        // A; with transpose they are column offsets.
        const T* a_slice = trans_a ? a + row0 : a + size_t(row0) * lda;
        T* c_slice = c + size_t(row0) * ldc;
        if constexpr (std::is_same_v<T, float>) {
            cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                        trans_b ? CblasTrans : CblasNoTrans, rows, n, k, alpha, a_slice, lda, b,
                        ldb, beta, c_slice, ldc);
        } else {
            cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                        trans_b ? CblasTrans : CblasNoTrans, rows, n, k, alpha, a_slice, lda, b,
                        ldb, beta, c_slice, ldc);
        }
    };
    for_each_tile<T>(m, [&](int t) {
        const int row0 = t * detail::kRowTile;
        call(row0, std::min(detail::kRowTile, m - row0));
    });
}

}  // namespace

void set_threads(int n) { g_threads.store(std::max(1, n)); }
int threads() { return g_threads.load(); }

void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc) {
    gemm_impl(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc) {
    gemm_impl(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace ki
