// NEON backend for aarch64. Baseline on that architecture, so no runtime
// feature probe is needed beyond the compile-time guard.

#if defined(__aarch64__)

#include "viewpaint/kernels.hpp"

#include <arm_neon.h>

#include <cstring>

namespace viewpaint::kern {
namespace {

void v_add(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_div(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vdivq_f32(vld1q_f32(a + i), vld1q_f32(b + i)));
    for (; i < n; ++i) out[i] = a[i] / b[i];
}

void v_scale(const float* a, float s, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_n_f32(vld1q_f32(a + i), s));
    for (; i < n; ++i) out[i] = s * a[i];
}

void v_axpy(float s, const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(y + i, vfmaq_n_f32(vld1q_f32(y + i), vld1q_f32(x + i), s));
    for (; i < n; ++i) y[i] += s * x[i];
}

inline double hsum_f64(float64x2_t v) { return vgetq_lane_f64(v, 0) + vgetq_lane_f64(v, 1); }

double v_sum(const float* a, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(a + i);
        acc0 = vaddq_f64(acc0, vcvt_f64_f32(vget_low_f32(v)));
        acc1 = vaddq_f64(acc1, vcvt_high_f64_f32(v));
    }
    double acc = hsum_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

double v_dot(const float* a, const float* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t va = vld1q_f32(a + i);
        const float32x4_t vb = vld1q_f32(b + i);
        acc0 = vfmaq_f64(acc0, vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
        acc1 = vfmaq_f64(acc1, vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
    }
    double acc = hsum_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
}

double v_sqdiff_sum(const float* a, const float* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t va = vld1q_f32(a + i);
        const float32x4_t vb = vld1q_f32(b + i);
        const float64x2_t dlo =
            vsubq_f64(vcvt_f64_f32(vget_low_f32(va)), vcvt_f64_f32(vget_low_f32(vb)));
        const float64x2_t dhi = vsubq_f64(vcvt_high_f64_f32(va), vcvt_high_f64_f32(vb));
        acc0 = vfmaq_f64(acc0, dlo, dlo);
        acc1 = vfmaq_f64(acc1, dhi, dhi);
    }
    double acc = hsum_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - b[i];
        acc += d * d;
    }
    return acc;
}

// 4x16 microkernel: 16 accumulators out of the 32 NEON registers.
template <int R>
inline void micro_rx16(const float* a, std::size_t a_row_stride, std::size_t a_l_stride,
                       const float* b, std::size_t ldb, float* c, std::size_t ldc,
                       std::size_t k, bool accumulate) {
    float32x4_t acc[R][4];
    for (int r = 0; r < R; ++r)
        for (int s = 0; s < 4; ++s)
            acc[r][s] = accumulate ? vld1q_f32(c + r * ldc + 4 * s) : vdupq_n_f32(0.0f);
    for (std::size_t l = 0; l < k; ++l) {
        float32x4_t bv[4];
        for (int s = 0; s < 4; ++s) bv[s] = vld1q_f32(b + l * ldb + 4 * s);
        for (int r = 0; r < R; ++r) {
            const float av = a[r * a_row_stride + l * a_l_stride];
            for (int s = 0; s < 4; ++s) acc[r][s] = vfmaq_n_f32(acc[r][s], bv[s], av);
        }
    }
    for (int r = 0; r < R; ++r)
        for (int s = 0; s < 4; ++s) vst1q_f32(c + r * ldc + 4 * s, acc[r][s]);
}

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
    for (; i + 4 <= m; i += 4) {
        const float* arow = a + i * a_row_stride;
        float* crow = c + i * n;
        std::size_t j = 0;
        for (; j + 16 <= n; j += 16)
            micro_rx16<4>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate);
        if (j < n) edge_cols(arow, a_row_stride, a_l_stride, b, n, crow, n, 4, k, j, n, accumulate);
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
                default: micro_rx16<3>(arow, a_row_stride, a_l_stride, b + j, n, crow + j, n, k, accumulate); break;
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
    gemm_strided(a, 1, m, b, c, m, k, n, accumulate);
}

void v_gemm_nt(const float* a, const float* b, float* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const float* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const float* brow = b + j * k;
            float32x4_t acc = vdupq_n_f32(0.0f);
            std::size_t l = 0;
            for (; l + 4 <= k; l += 4)
                acc = vfmaq_f32(acc, vld1q_f32(arow + l), vld1q_f32(brow + l));
            float sum = vaddvq_f32(acc);
            for (; l < k; ++l) sum += arow[l] * brow[l];
            float* dst = c + i * n + j;
            *dst = accumulate ? *dst + sum : sum;
        }
    }
}

}  // namespace

const Kernels& neon_kernels() {
    static const Kernels k = {
        "neon", v_add, v_sub,  v_mul,        v_div,     v_scale,   v_axpy,
        v_sum,  v_dot, v_sqdiff_sum, v_gemm_nn, v_gemm_nt, v_gemm_tn,
    };
    return k;
}

}  // namespace viewpaint::kern

#endif  // __aarch64__
