#ifndef KI_LINALG_HPP
#define KI_LINALG_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ki {

// Worker threads used inside a single run's kernels. Results are bitwise
// independent of this setting: work is split over fixed-size row tiles and
// each tile is computed whole by exactly one thread.
void set_threads(int n);
int threads();

// Row-major C[M,N] = alpha * op(A) * op(B) + beta * C.
// op(A) is [M,K]: if trans_a, A is stored [K,M] with leading dimension lda.
void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a, int lda,
          const float* b, int ldb, float beta, float* c, int ldc);
void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a, int lda,
          const double* b, int ldb, double beta, double* c, int ldc);

namespace detail {
constexpr int kRowTile = 64;
}

// Elementwise helpers, tiled with the same ownership discipline.
template <typename T>
void axpy(size_t n, T alpha, const T* x, T* y) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(size_t(r) * size_t(c)) {}
    void resize(int r, int c) {
        rows = r;
        cols = c;
        v.assign(size_t(r) * size_t(c), T(0));
    }
    T* row(int i) { return v.data() + size_t(i) * cols; }
    const T* row(int i) const { return v.data() + size_t(i) * cols; }
    T* data() { return v.data(); }
    const T* data() const { return v.data(); }
    size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), T(0)); }
};

}  // namespace ki

#endif
