// AVX2+FMA backend. Compiled with -mavx2 -mfma for this translation unit
// only; callers reach it through the dispatch table after a runtime CPU
// check (see dispatch.cpp).

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)

#include "viewpaint/kernels.hpp"

#include <immintrin.h>

#include <cstring>

namespace viewpaint::kern {
namespace {

void v_add(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_div(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_div_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void v_scale(const float* a, float s, float* out, std::size_t n) {
    const __m256 vs = _mm256_set1_ps(s);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i, _mm256_mul_ps(vs, _mm256_loadu_ps(a + i)));
    for (; i < n; ++i) out[i] = s * a[i];
}

void v_axpy(float s, const float* x, float* y, std::size_t n) {
    const __m256 vs = _mm256_set1_ps(s);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(vs, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    for (; i < n; ++i) y[i] += s * x[i];
}

inline double hsum_pd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

// Reductions widen each float to double before accumulating, matching the
// scalar backend's precision (products of two f32 values are exact in f64).
double v_sum(const float* a, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(a + i);
        acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
        acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

double v_dot(const float* a, const float* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 va = _mm256_loadu_ps(a + i);
        const __m256 vb = _mm256_loadu_ps(b + i);
        acc0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                               _mm256_cvtps_pd(_mm256_castps256_ps128(vb)), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                               _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)), acc1);
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

double v_sqdiff_sum(const float* a, const float* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 va = _mm256_loadu_ps(a + i);
        const __m256 vb = _mm256_loadu_ps(b + i);
        const __m256d dlo = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(va)),
                                          _mm256_cvtps_pd(_mm256_castps256_ps128(vb)));
        const __m256d dhi = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(va, 1)),
                                          _mm256_cvtps_pd(_mm256_extractf128_ps(vb, 1)));
        acc0 = _mm256_fmadd_pd(dlo, dlo, acc0);
        acc1 = _mm256_fmadd_pd(dhi, dhi, acc1);
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// GEMM
//
// 6x16 microkernel: 12 FMA accumulators keep both FMA ports busy. A-element
// access is parameterized by two strides so the same kernel serves
// C = A*B (nn) and C = A^T*B (tn).
// ---------------------------------------------------------------------------

template <int R>
inline void micro_rx16(const float* a, std::size_t a_row_stride, std::size_t a_l_stride,
                       const float* b, std::size_t ldb, float* c, std::size_t ldc,
                       std::size_t k, bool accumulate) {
    __m256 acc0[R], acc1[R];
    for (int r = 0; r < R; ++r) {
        if (accumulate) {
            acc0[r] = _mm256_loadu_ps(c + r * ldc);
            acc1[r] = _mm256_loadu_ps(c + r * ldc + 8);
        } else {
            acc0[r] = _mm256_setzero_ps();
            acc1[r] = _mm256_setzero_ps();
        }
    }
    for (std::size_t l = 0; l < k; ++l) {
        const __m256 b0 = _mm256_loadu_ps(b + l * ldb);
        const __m256 b1 = _mm256_loadu_ps(b + l * ldb + 8);
        for (int r = 0; r < R; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * a_row_stride + l * a_l_stride);
            acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
            acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
        }
    }
    for (int r = 0; r < R; ++r) {
        _mm256_storeu_ps(c + r * ldc, acc0[r]);
        _mm256_storeu_ps(c + r * ldc + 8, acc1[r]);
    }
}

template <int R>
inline void micro_rx8(const float* a, std::size_t a_row_stride, std::size_t a_l_stride,
                      const float* b, std::size_t ldb, float* c, std::size_t ldc,
                      std::size_t k, bool accumulate) {
    __m256 acc[R];
    for (int r = 0; r < R; ++r)
        acc[r] = accumulate ? _mm256_loadu_ps(c + r * ldc) : _mm256_setzero_ps();
    for (std::size_t l = 0; l < k; ++l) {
        const __m256 b0 = _mm256_loadu_ps(b + l * ldb);
        for (int r = 0; r < R; ++r) {
            const __m256 av = _mm256_broadcast_ss(a + r * a_row_stride + l * a_l_stride);
            acc[r] = _mm256_fmadd_ps(av, b0, acc[r]);
        }
    }
    for (int r = 0; r < R; ++r) _mm256_storeu_ps(c + r * ldc, acc[r]);
}

// Scalar edge for trailing columns (< 8).
inline void edge_cols(const float* a, std::size_t a_row_stride, std::size_t a_l_stride,
                      const float* b, std::size_t ldb, float* c, std::size_t ldc,
                      std::size_t rows, std::size_t k, std::size_t j0, std::size_t n,
                      bool accumulate) {
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = j0; j < n; ++j) {
            float acc = accumulate ? c[r * ldc + j] : 0.0f;
            for (std::size_t l = 0; l < k; ++l)
                acc += a[r * a_row_stride + l * a_l_stride] * b[l * ldb + j];
            c[r * ldc + j] = acc;
        }
    }
}

void gemm_strided(const float* a, std::size_t a_row_stride, std::size_t a_l_stride,
                  const float* b, float* c, std::size_t m, std::size_t k, std::size_t n,
                  bool accumulate) {
    std::size_t i = 0;
    for (; i + 6 <= m; i += 6) {
        const float* arow = a + i * a_row_stride;
        float* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 16 <= n; j += 16)
            micro_rx16<6>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate);
        for (; j + 8 <= n; j += 8)
            micro_rx8<6>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate);
        if (j < n) edge_cols(arow, a_row_stride, a_l_stride, b, n, crow, n, 6, k, j, n, accumulate);
    }
    const std::size_t rem = m - i;
    if (rem) {
        const float* arow = a + i * a_row_stride;
        float* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 16 <= n; j += 16) {
            switch (rem) {
                case 1: micro_rx16<1>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                case 2: micro_rx16<2>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                case 3: micro_rx16<3>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                case 4: micro_rx16<4>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                default: micro_rx16<5>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
            }
        }
        for (; j + 8 <= n; j += 8) {
            switch (rem) {
                case 1: micro_rx8<1>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                case 2: micro_rx8<2>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                case 3: micro_rx8<3>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                case 4: micro_rx8<4>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
                default: micro_rx8<5>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
            }
        }
        if (j < n) edge_cols(arow, a_row_stride, a_l_stride, b, n, crow, n, rem, k, j, n, accumulate);
    }
}

void v_gemm_nn(const float* a, const float* b, float* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    gemm_strided(a, k, 1, b, c, m, k, n, accumulate);
}

void v_gemm_tn(const float* a, const float* b, float* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    // a is [k,m]: row r of the logical A^T walks a with stride 1, l with stride m.
    gemm_strided(a, 1, m, b, c, m, k, n, accumulate);
}

inline float hsum_ps(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

// C[i,j] = dot(A row i, B row j): vectorize the shared k axis, block 2x4.
void v_gemm_nt(const float* a, const float* b, float* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
        const float* a0 = a + i * k;
        const float* a1 = a0 + k;
        std::size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            __m256 acc[2][4];
            for (int r = 0; r < 2; ++r)
                for (int s = 0; s < 4; ++s) acc[r][s] = _mm256_setzero_ps();
            std::size_t l = 0;
            for (; l + 8 <= k; l += 8) {
                const __m256 va0 = _mm256_loadu_ps(a0 + l);
                const __m256 va1 = _mm256_loadu_ps(a1 + l);
                for (int s = 0; s < 4; ++s) {
                    const __m256 vb = _mm256_loadu_ps(b + (j + s) * k + l);
                    acc[0][s] = _mm256_fmadd_ps(va0, vb, acc[0][s]);
                    acc[1][s] = _mm256_fmadd_ps(va1, vb, acc[1][s]);
                }
            }
            for (int r = 0; r < 2; ++r) {
                for (int s = 0; s < 4; ++s) {
                    float sum = hsum_ps(acc[r][s]);
                    for (std::size_t lt = l; lt < k; ++lt)
                        sum += (r ? a1 : a0)[lt] * b[(j + s) * k + lt];
                    float* dst = c + (i + r) * n + j + s;
                    *dst = accumulate ? *dst + sum : sum;
                }
            }
        }
        for (; j < n; ++j) {
            const float* brow = b + j * k;
            for (int r = 0; r < 2; ++r) {
                const float* ar = r ? a1 : a0;
                __m256 acc = _mm256_setzero_ps();
                std::size_t l = 0;
                for (; l + 8 <= k; l += 8)
                    acc = _mm256_fmadd_ps(_mm256_loadu_ps(ar + l), _mm256_loadu_ps(brow + l), acc);
                float sum = hsum_ps(acc);
                for (; l < k; ++l) sum += ar[l] * brow[l];
                float* dst = c + (i + r) * n + j;
                *dst = accumulate ? *dst + sum : sum;
            }
        }
    }
    if (i < m) {
        const float* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            __m256 acc = _mm256_setzero_ps();
            std::size_t l = 0;
            for (; l + 8 <= k; l += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + l), _mm256_loadu_ps(brow + l), acc);
            float sum = hsum_ps(acc);
            for (; l < k; ++l) sum += arow[l] * brow[l];
            float* dst = c + i * n + j;
            *dst = accumulate ? *dst + sum : sum;
        }
    }
}

}  // namespace

const Kernels& avx2_kernels() {
    static const Kernels k = {
        "avx2", v_add, v_sub,  v_mul,        v_div,     v_scale,   v_axpy,
        v_sum,  v_dot, v_sqdiff_sum, v_gemm_nn, v_gemm_nt, v_gemm_tn,
    };
    return k;
}

}  // namespace viewpaint::kern

#endif  // x86
